#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nonword/dataset.hpp"
#include "nonword/model.hpp"

namespace nonword::eval {

struct ConfusionMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool precision_undefined = false; // no positive predictions
    bool recall_undefined = false;    // no positive labels
};

/// Threshold rule: predict positive iff score >= threshold. 0/0 cells are
/// reported as 0 with the corresponding undefined flag set.
ConfusionMetrics confusion_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold = 0.5);

struct RocCurve {
    std::vector<std::pair<double, double>> points; // (fpr, tpr), (0,0) .. (1,1)
};

struct RocResult {
    RocCurve curve;
    double auc = 0.0;
};

/// Threshold sweep over distinct scores (ties grouped) with trapezoidal AUC;
/// equal to the Mann-Whitney pair statistic with half-credit ties.
RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct NonwordRow {
    int nonword_id = 0; // 0 = aggregate
    size_t support = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double auc = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool auc_undefined = false; // single-class subset
    RocCurve roc;
};

struct EvalReport {
    std::vector<NonwordRow> rows; // per nonword, ascending id
    NonwordRow aggregate;         // support-weighted over rows
    double auc_std_dev = 0.0;     // population SD of defined per-nonword AUCs
    double threshold = 0.5;
    dataset::Label positive_label = dataset::Label::incorrect;
    RocCurve pooled_roc; // over the whole test split, when both classes present
};

/// Models keyed by nonword, or one shared word-independent model.
struct ModelSet {
    std::optional<model::Model> shared;
    std::map<int, model::Model> per_word;

    const model::Model* for_word(int nonword_id) const;
};

using FeatureMap = std::map<std::string, features::FeatureMatrix>;

EvalReport evaluate(const ModelSet& models, const dataset::DatasetManifest& manifest,
                    const FeatureMap& features, double threshold = 0.5);

std::string report_to_csv(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

} // namespace nonword::eval
