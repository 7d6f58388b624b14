#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nonword/dataset.hpp"
#include "nonword/model.hpp"

namespace nonword::train {

enum class FinetuneMode { none, ft_last_layer, ft_all_layers, ft_add_layer, from_scratch };

const char* finetune_mode_name(FinetuneMode m);
FinetuneMode finetune_mode_from(const std::string& s);

struct TrainConfig {
    double lr = 1e-3;
    int max_epochs = 100;
    int patience = 10; // >= max_epochs disables early stopping
    int batch_size = 16;
    uint64_t seed = 0;
    FinetuneMode finetune_mode = FinetuneMode::none;
    double finetune_lr = 1e-5; // ft_all_layers
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    int best_epoch = 0; // 1-based
    std::string stop_reason;
};

std::string train_log_to_csv(const TrainLog& log);

using FeatureMap = std::map<std::string, features::FeatureMatrix>;

struct TrainResult {
    model::Checkpoint checkpoint;
    TrainLog log;
};

/// Called after every epoch with a resumable snapshot (parameters + Adam state).
using EpochCallback = std::function<void(int epoch, const model::Checkpoint&)>;

/// Train one model on the pooled train split with early stopping on val loss
/// and best-epoch weight restore. The model family follows the feature kind:
/// utterance embeddings get the two-layer MLP, everything else the VGG-style
/// CNN sized to the longest train/val sequence.
TrainResult train_word_independent(const dataset::DatasetManifest& manifest,
                                   const FeatureMap& features, const TrainConfig& cfg,
                                   const EpochCallback& on_epoch = {},
                                   const model::Checkpoint* resume = nullptr);

/// Word-dependent training per cfg.finetune_mode, on records of one nonword:
/// ft_last_layer retrains fc_out only; ft_all_layers updates everything at
/// finetune_lr; ft_add_layer inserts dense(16)+relu before a re-initialized
/// head and trains only those; from_scratch ignores the base parameters.
TrainResult finetune_word_dependent(const model::Checkpoint& base,
                                    const dataset::DatasetManifest& manifest,
                                    const FeatureMap& features, int nonword_id,
                                    const TrainConfig& cfg);

struct SweepRow {
    std::string feature_dir;
    bool failed = false;
    std::string error;
    size_t support = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double auc = 0.0;
};

/// One word-independent model per feature directory (files <utterance_id>.nwf1);
/// weighted-average test metrics per set, in input order. A failing set is
/// reported as failed without aborting the others.
std::vector<SweepRow> sweep_feature_sets(const std::vector<std::string>& feature_dirs,
                                         const dataset::DatasetManifest& manifest,
                                         const TrainConfig& cfg);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Load <dir>/<utterance_id>.nwf1 for every manifest record.
FeatureMap load_feature_dir(const std::string& dir, const dataset::DatasetManifest& manifest);

} // namespace nonword::train
