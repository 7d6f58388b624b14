#include "nonword/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nonword/error.hpp"

namespace nonword::eval {

ConfusionMetrics confusion_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold) {
    if (scores.empty() || scores.size() != labels.size())
        throw Error(Errc::empty_input, "need at least one (score, label) pair");

    size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        const bool pos = labels[i] != 0;
        if (pred && pos)
            ++tp;
        else if (pred && !pos)
            ++fp;
        else if (!pred && pos)
            ++fn;
        else
            ++tn;
    }

    ConfusionMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    if (tp + fp == 0)
        m.precision_undefined = true;
    else
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn == 0)
        m.recall_undefined = true;
    else
        m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return m;
}

RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty() || scores.size() != labels.size())
        throw Error(Errc::empty_input, "need at least one (score, label) pair");

    size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l != 0 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw Error(Errc::single_class_input, "ROC needs both classes present");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](size_t a, size_t b) {
        return scores[a] > scores[b];
    });

    RocResult res;
    res.curve.points.emplace_back(0.0, 0.0);
    size_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // everything tied at this score flips together
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] != 0 ? tp : fp)++;
            ++i;
        }
        res.curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                                      static_cast<double>(tp) / static_cast<double>(n_pos));
    }

    double auc = 0.0;
    for (size_t k = 1; k < res.curve.points.size(); ++k) {
        const auto& [x0, y0] = res.curve.points[k - 1];
        const auto& [x1, y1] = res.curve.points[k];
        auc += (x1 - x0) * (y0 + y1) * 0.5;
    }
    res.auc = auc;
    return res;
}

const model::Model* ModelSet::for_word(int nonword_id) const {
    auto it = per_word.find(nonword_id);
    if (it != per_word.end()) return &it->second;
    if (shared) return &*shared;
    return nullptr;
}

EvalReport evaluate(const ModelSet& models, const dataset::DatasetManifest& manifest,
                    const FeatureMap& features, double threshold) {
    const auto test = manifest.in_split(dataset::Split::test);
    if (test.empty()) throw Error(Errc::empty_test_split, "no records in the test split");

    std::set<int> words;
    for (const auto* r : test) words.insert(r->nonword_id);

    EvalReport report;
    report.threshold = threshold;
    report.positive_label = manifest.positive_label;

    std::vector<double> all_scores;
    std::vector<int> all_labels;

    for (int word : words) {
        const model::Model* m = models.for_word(word);
        if (!m)
            throw Error(Errc::missing_model_for_word,
                        "no model for nonword " + std::to_string(word));

        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto* r : test) {
            if (r->nonword_id != word) continue;
            auto it = features.find(r->utterance_id);
            if (it == features.end())
                throw Error(Errc::io_error, "no features for utterance " + r->utterance_id);
            const double s = model::predict(*m, it->second);
            scores.push_back(s);
            labels.push_back(r->label == manifest.positive_label ? 1 : 0);
            all_scores.push_back(s);
            all_labels.push_back(labels.back());
        }

        NonwordRow row;
        row.nonword_id = word;
        row.support = scores.size();
        const auto cm = confusion_metrics(scores, labels, threshold);
        row.accuracy = cm.accuracy;
        row.precision = cm.precision;
        row.recall = cm.recall;
        row.precision_undefined = cm.precision_undefined;
        row.recall_undefined = cm.recall_undefined;
        const bool single_class =
            std::all_of(labels.begin(), labels.end(), [](int l) { return l == 0; }) ||
            std::all_of(labels.begin(), labels.end(), [](int l) { return l != 0; });
        if (single_class) {
            row.auc_undefined = true;
        } else {
            auto rr = roc_auc(scores, labels);
            row.auc = rr.auc;
            row.roc = std::move(rr.curve);
        }
        report.rows.push_back(std::move(row));
    }

    // Support-weighted aggregate; AUC aggregates over rows where it is defined.
    NonwordRow agg;
    agg.nonword_id = 0;
    double wacc = 0, wprec = 0, wrec = 0, wauc = 0;
    size_t total = 0, auc_support = 0;
    std::vector<double> defined_aucs;
    for (const auto& row : report.rows) {
        total += row.support;
        wacc += row.accuracy * static_cast<double>(row.support);
        wprec += row.precision * static_cast<double>(row.support);
        wrec += row.recall * static_cast<double>(row.support);
        if (!row.auc_undefined) {
            wauc += row.auc * static_cast<double>(row.support);
            auc_support += row.support;
            defined_aucs.push_back(row.auc);
        }
    }
    agg.support = total;
    agg.accuracy = wacc / static_cast<double>(total);
    agg.precision = wprec / static_cast<double>(total);
    agg.recall = wrec / static_cast<double>(total);
    if (auc_support > 0)
        agg.auc = wauc / static_cast<double>(auc_support);
    else
        agg.auc_undefined = true;
    report.aggregate = agg;

    if (!defined_aucs.empty()) {
        const double mean = std::accumulate(defined_aucs.begin(), defined_aucs.end(), 0.0) /
                            static_cast<double>(defined_aucs.size());
        double var = 0.0;
        for (double a : defined_aucs) var += (a - mean) * (a - mean);
        report.auc_std_dev = std::sqrt(var / static_cast<double>(defined_aucs.size()));
    }

    const bool pooled_two_class =
        std::any_of(all_labels.begin(), all_labels.end(), [](int l) { return l != 0; }) &&
        std::any_of(all_labels.begin(), all_labels.end(), [](int l) { return l == 0; });
    if (pooled_two_class) report.pooled_roc = roc_auc(all_scores, all_labels).curve;

    return report;
}

namespace {

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string row_flags(const NonwordRow& row) {
    std::string flags;
    auto add = [&flags](const char* f) {
        if (!flags.empty()) flags += ';';
        flags += f;
    };
    if (row.precision_undefined) add("precision_undefined");
    if (row.recall_undefined) add("recall_undefined");
    if (row.auc_undefined) add("auc_undefined");
    return flags;
}

void row_to_csv(std::ostringstream& out, const std::string& id, const NonwordRow& row) {
    out << id << ',' << row.support << ',' << fmt6(row.accuracy) << ',' << fmt6(row.precision)
        << ',' << fmt6(row.recall) << ',' << fmt6(row.auc) << ',' << row_flags(row) << "\n";
}

nlohmann::json roc_to_json(const RocCurve& roc) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [fpr, tpr] : roc.points) arr.push_back({fpr, tpr});
    return arr;
}

} // namespace

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "nonword_id,support,accuracy,precision,recall,auc,flags\n";
    for (const auto& row : report.rows) row_to_csv(out, std::to_string(row.nonword_id), row);
    row_to_csv(out, "all", report.aggregate);
    return out.str();
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["threshold"] = report.threshold;
    j["positive_label"] = dataset::label_name(report.positive_label);
    j["auc_std_dev"] = report.auc_std_dev;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json jr;
        jr["nonword_id"] = row.nonword_id;
        jr["support"] = row.support;
        jr["accuracy"] = row.accuracy;
        jr["precision"] = row.precision;
        jr["recall"] = row.recall;
        jr["auc"] = row.auc;
        jr["flags"] = row_flags(row);
        jr["roc"] = roc_to_json(row.roc);
        rows.push_back(jr);
    }
    j["rows"] = rows;
    j["aggregate"] = {{"support", report.aggregate.support},
                      {"accuracy", report.aggregate.accuracy},
                      {"precision", report.aggregate.precision},
                      {"recall", report.aggregate.recall},
                      {"auc", report.aggregate.auc},
                      {"flags", row_flags(report.aggregate)}};
    j["pooled_roc"] = roc_to_json(report.pooled_roc);
    return j.dump(2) + "\n";
}

} // namespace nonword::eval
