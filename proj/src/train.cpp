#include "nonword/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_set>

#include "nonword/error.hpp"
#include "nonword/eval.hpp"

namespace nonword::train {

namespace {

using dataset::Split;
using dataset::UtteranceRecord;
using features::FeatureKind;
using features::FeatureMatrix;
using model::Checkpoint;
using model::Model;
using nn::Tensor;

const char* kTrainableFields[] = {"kernel", "bias", "weight", "gamma", "beta"};

nn::Tensor& field_slot(nn::LayerParams<float>& p, const char* field) {
    const std::string f = field;
    if (f == "kernel") return p.kernel;
    if (f == "bias") return p.bias;
    if (f == "weight") return p.weight;
    if (f == "gamma") return p.gamma;
    return p.beta;
}

nn::Tensor* trainable_field(nn::LayerParams<float>& p, const char* field) {
    nn::Tensor& t = field_slot(p, field);
    return t.empty() ? nullptr : &t;
}

// Trainable tensors in canonical (layer, field) order, skipping frozen layers.
template <typename Params>
std::vector<nn::Tensor*> trainable_list(const std::vector<nn::LayerSpec>& layers, Params& params,
                                        const std::unordered_set<std::string>& frozen) {
    std::vector<nn::Tensor*> out;
    for (size_t i = 0; i < layers.size(); ++i) {
        if (frozen.count(layers[i].name)) continue;
        for (const char* f : kTrainableFields)
            if (auto* t = trainable_field(params[i], f)) out.push_back(t);
    }
    return out;
}

struct Sample {
    const UtteranceRecord* record = nullptr;
    const FeatureMatrix* features = nullptr;
    int target = 0;
};

struct Prepared {
    std::vector<Sample> train, val;
    model::ModelFamily family = model::ModelFamily::vgg_cnn;
    FeatureKind kind = FeatureKind::mel;
    size_t frames = 0; // padded length (vgg)
    size_t dims = 0;
    double w1 = 1.0, w0 = 1.0; // positive/negative class weights
};

const FeatureMatrix& features_for(const FeatureMap& features, const UtteranceRecord& rec) {
    auto it = features.find(rec.utterance_id);
    if (it == features.end())
        throw Error(Errc::io_error, "no features for utterance " + rec.utterance_id);
    return it->second;
}

Prepared prepare(const dataset::DatasetManifest& manifest, const FeatureMap& features,
                 int nonword_id /* 0 = all */) {
    Prepared prep;
    auto collect = [&](Split split) {
        std::vector<Sample> out;
        for (const auto& rec : manifest.records) {
            if (rec.split != split) continue;
            if (nonword_id != 0 && rec.nonword_id != nonword_id) continue;
            Sample s;
            s.record = &rec;
            s.features = &features_for(features, rec);
            s.target = rec.label == manifest.positive_label ? 1 : 0;
            out.push_back(s);
        }
        return out;
    };
    prep.train = collect(Split::train);
    prep.val = collect(Split::val);
    if (prep.train.empty()) throw Error(Errc::empty_split, "train split is empty");
    if (prep.val.empty()) throw Error(Errc::empty_split, "val split is empty");

    prep.kind = prep.train.front().features->kind;
    prep.dims = prep.train.front().features->dims;
    for (const auto& s : {std::cref(prep.train), std::cref(prep.val)})
        for (const auto& sample : s.get()) {
            if (sample.features->kind != prep.kind)
                throw Error(Errc::dim_mismatch,
                            "mixed feature kinds in " + sample.record->utterance_id);
            if (sample.features->dims != prep.dims)
                throw Error(Errc::dim_mismatch, "feature dims differ at " +
                                                    sample.record->utterance_id + ": " +
                                                    std::to_string(sample.features->dims) +
                                                    " vs " + std::to_string(prep.dims));
            if (prep.kind == FeatureKind::utterance_embedding && sample.features->frames != 1)
                throw Error(Errc::dim_mismatch, "utterance embedding with " +
                                                    std::to_string(sample.features->frames) +
                                                    " frames at " + sample.record->utterance_id);
            prep.frames = std::max(prep.frames, sample.features->frames);
        }

    prep.family = prep.kind == FeatureKind::utterance_embedding ? model::ModelFamily::embedding_mlp
                                                                : model::ModelFamily::vgg_cnn;

    const auto weights = nonword_id == 0
                             ? dataset::class_weights(manifest, Split::train)
                             : dataset::class_weights(manifest, Split::train, nonword_id);
    prep.w1 = weights.of(manifest.positive_label);
    prep.w0 = weights.of(manifest.positive_label == dataset::Label::incorrect
                             ? dataset::Label::correct
                             : dataset::Label::incorrect);
    return prep;
}

// Batch tensor for samples[first, first+count), padded to the model input.
Tensor make_batch(const std::vector<Sample>& samples, const std::vector<size_t>& order,
                  size_t first, size_t count, const model::ModelSpec& spec) {
    Tensor batch;
    if (spec.family == model::ModelFamily::vgg_cnn) {
        const size_t frames = spec.input_shape[1], dims = spec.input_shape[2];
        batch = Tensor({count, 1, frames, dims});
        for (size_t i = 0; i < count; ++i) {
            const auto& fm = *samples[order[first + i]].features;
            const size_t rows = std::min(fm.frames, frames);
            std::copy(fm.data.begin(),
                      fm.data.begin() + static_cast<std::ptrdiff_t>(rows * dims),
                      batch.data.begin() + static_cast<std::ptrdiff_t>(i * frames * dims));
        }
    } else {
        const size_t dims = spec.input_shape[0];
        batch = Tensor({count, dims});
        for (size_t i = 0; i < count; ++i) {
            const auto& fm = *samples[order[first + i]].features;
            std::copy(fm.data.begin(), fm.data.end(),
                      batch.data.begin() + static_cast<std::ptrdiff_t>(i * dims));
        }
    }
    return batch;
}

std::vector<int> batch_targets(const std::vector<Sample>& samples,
                               const std::vector<size_t>& order, size_t first, size_t count) {
    std::vector<int> t(count);
    for (size_t i = 0; i < count; ++i) t[i] = samples[order[first + i]].target;
    return t;
}

void deterministic_shuffle(std::vector<size_t>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

// Snapshot Adam state into checkpoint-aligned per-layer structures.
void snapshot_adam(const Model& m, const std::unordered_set<std::string>& frozen,
                   const nn::AdamState<float>& state, Checkpoint& ckpt) {
    ckpt.adam_m.assign(m.spec.layers.size(), {});
    ckpt.adam_v.assign(m.spec.layers.size(), {});
    size_t idx = 0;
    for (size_t i = 0; i < m.spec.layers.size(); ++i) {
        if (frozen.count(m.spec.layers[i].name)) continue;
        auto& p = const_cast<std::vector<nn::LayerParams<float>>&>(m.params)[i];
        for (const char* f : kTrainableFields) {
            if (!trainable_field(p, f)) continue;
            field_slot(ckpt.adam_m[i], f) = state.m[idx];
            field_slot(ckpt.adam_v[i], f) = state.v[idx];
            ++idx;
        }
    }
}

struct LoopConfig {
    double lr = 1e-3;
    int max_epochs = 100;
    int patience = 10;
    int batch_size = 16;
    uint64_t seed = 0;
};

TrainResult run_training(Model m, const Prepared& prep, const LoopConfig& cfg,
                         const std::unordered_set<std::string>& frozen,
                         const EpochCallback& on_epoch, const Checkpoint* resume) {
    auto trainables = trainable_list(m.spec.layers, m.params, frozen);
    auto adam = nn::make_adam<float>(cfg.lr, trainables);

    int start_epoch = 1;
    if (resume) {
        adam.step_count = resume->meta.adam_step_count;
        size_t idx = 0;
        for (size_t i = 0; i < m.spec.layers.size(); ++i) {
            if (frozen.count(m.spec.layers[i].name)) continue;
            auto& am = const_cast<std::vector<nn::LayerParams<float>>&>(resume->adam_m)[i];
            auto& av = const_cast<std::vector<nn::LayerParams<float>>&>(resume->adam_v)[i];
            for (const char* f : kTrainableFields) {
                auto* pm = trainable_field(am, f);
                if (!pm && !trainable_field(m.params[i], f)) continue;
                if (!pm) throw Error(Errc::corrupt_blob, "resume checkpoint lacks Adam state");
                adam.m[idx] = *pm;
                adam.v[idx] = *trainable_field(av, f);
                ++idx;
            }
        }
        start_epoch = resume->meta.epochs_run + 1;
    }

    nn::ForwardOptions train_opts;
    train_opts.training = true;
    train_opts.frozen = frozen.empty() ? nullptr : &frozen;

    TrainLog log;
    double best_val = resume ? resume->meta.best_val_loss : std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    auto best_params = m.params;
    int bad_epochs = 0;

    std::vector<size_t> order(prep.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<size_t> val_order(prep.val.size());
    for (size_t i = 0; i < val_order.size(); ++i) val_order[i] = i;

    int epochs_run = start_epoch - 1;
    for (int epoch = start_epoch; epoch <= cfg.max_epochs; ++epoch) {
        // the batch order is a pure function of (seed, epoch) so that resumed
        // runs replay the identical schedule
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 rng(nn::mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
        deterministic_shuffle(order, rng);

        double loss_acc = 0.0;
        size_t batch_index = 0;
        for (size_t first = 0; first < order.size(); first += cfg.batch_size, ++batch_index) {
            const size_t count = std::min(order.size() - first, static_cast<size_t>(cfg.batch_size));
            Tensor input = make_batch(prep.train, order, first, count, m.spec);
            const auto targets = batch_targets(prep.train, order, first, count);

            train_opts.rng_seed =
                nn::mix_seed(cfg.seed, (static_cast<uint64_t>(epoch) << 24) | batch_index);
            auto fwd = nn::forward(m.spec.layers, m.params, input, train_opts);
            nn::update_running_stats(m.spec.layers, m.params, fwd, train_opts.frozen);

            loss_acc += nn::weighted_bce(fwd.output, targets, prep.w1, prep.w0) *
                        static_cast<double>(count);
            auto loss_grad = nn::weighted_bce_grad(fwd.output, targets, prep.w1, prep.w0);
            auto grads = nn::backward(m.spec.layers, m.params, fwd, loss_grad);

            std::vector<const Tensor*> grad_list;
            for (size_t i = 0; i < m.spec.layers.size(); ++i) {
                if (frozen.count(m.spec.layers[i].name)) continue;
                for (const char* f : kTrainableFields)
                    if (trainable_field(m.params[i], f))
                        grad_list.push_back(trainable_field(grads.layers[i], f));
            }
            nn::adam_step(adam, trainables, grad_list);
        }

        EpochStats stats;
        stats.train_loss = loss_acc / static_cast<double>(prep.train.size());

        // validation pass
        double val_loss_acc = 0.0;
        size_t correct = 0;
        for (size_t first = 0; first < prep.val.size();
             first += static_cast<size_t>(cfg.batch_size)) {
            const size_t count =
                std::min(prep.val.size() - first, static_cast<size_t>(cfg.batch_size));
            Tensor input = make_batch(prep.val, val_order, first, count, m.spec);
            const auto targets = batch_targets(prep.val, val_order, first, count);
            auto out = nn::forward(m.spec.layers, m.params, input, {}).output;
            val_loss_acc +=
                nn::weighted_bce(out, targets, prep.w1, prep.w0) * static_cast<double>(count);
            for (size_t i = 0; i < count; ++i)
                if ((out.data[i] >= 0.5f ? 1 : 0) == targets[i]) ++correct;
        }
        stats.val_loss = val_loss_acc / static_cast<double>(prep.val.size());
        stats.val_acc = static_cast<double>(correct) / static_cast<double>(prep.val.size());
        log.epochs.push_back(stats);
        epochs_run = epoch;

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best_epoch = epoch;
            best_params = m.params;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
        }

        if (on_epoch) {
            Checkpoint snap;
            snap.model = m;
            snap.meta.seed = cfg.seed;
            snap.meta.epochs_run = epoch;
            snap.meta.best_val_loss = best_val;
            snap.meta.adam_step_count = adam.step_count;
            snapshot_adam(m, frozen, adam, snap);
            on_epoch(epoch, snap);
        }

        if (bad_epochs > cfg.patience) {
            log.stop_reason = "early_stop";
            break;
        }
    }
    if (log.stop_reason.empty()) log.stop_reason = "max_epochs";
    log.best_epoch = best_epoch;

    TrainResult result;
    result.checkpoint.model = std::move(m);
    result.checkpoint.model.params = std::move(best_params); // restore-best
    result.checkpoint.meta.seed = cfg.seed;
    result.checkpoint.meta.epochs_run = epochs_run;
    result.checkpoint.meta.best_val_loss = best_val;
    result.log = std::move(log);
    return result;
}

} // namespace

const char* finetune_mode_name(FinetuneMode m) {
    switch (m) {
        case FinetuneMode::none: return "none";
        case FinetuneMode::ft_last_layer: return "ft-last-layer";
        case FinetuneMode::ft_all_layers: return "ft-all-layers";
        case FinetuneMode::ft_add_layer: return "ft-add-layer";
        case FinetuneMode::from_scratch: return "from-scratch";
    }
    return "none";
}

FinetuneMode finetune_mode_from(const std::string& s) {
    for (FinetuneMode m : {FinetuneMode::none, FinetuneMode::ft_last_layer,
                           FinetuneMode::ft_all_layers, FinetuneMode::ft_add_layer,
                           FinetuneMode::from_scratch})
        if (s == finetune_mode_name(m)) return m;
    throw Error(Errc::bad_config, "unknown finetune mode `" + s + "`");
}

std::string train_log_to_csv(const TrainLog& log) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,val_acc\n";
    char buf[128];
    for (size_t i = 0; i < log.epochs.size(); ++i) {
        const auto& e = log.epochs[i];
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", i + 1, e.train_loss, e.val_loss,
                      e.val_acc);
        out << buf;
    }
    return out.str();
}

TrainResult train_word_independent(const dataset::DatasetManifest& manifest,
                                   const FeatureMap& features, const TrainConfig& cfg,
                                   const EpochCallback& on_epoch, const model::Checkpoint* resume) {
    const Prepared prep = prepare(manifest, features, 0);

    Model m;
    if (resume) {
        m = resume->model;
        if (!resume->has_optimizer_state())
            throw Error(Errc::corrupt_blob, "resume checkpoint has no optimizer state");
    } else if (prep.family == model::ModelFamily::embedding_mlp) {
        auto spec = model::build_embedding_mlp();
        if (prep.dims != spec.input_shape[0])
            throw Error(Errc::dim_mismatch, "utterance embeddings must be " +
                                                std::to_string(spec.input_shape[0]) +
                                                "-dimensional, got " + std::to_string(prep.dims));
        m = model::init_model(spec, cfg.seed);
    } else {
        auto spec = model::build_vgg(prep.frames, prep.dims, prep.kind);
        m = model::init_model(spec, cfg.seed);
    }

    LoopConfig loop{cfg.lr, cfg.max_epochs, cfg.patience, cfg.batch_size, cfg.seed};
    auto result = run_training(std::move(m), prep, loop, {}, on_epoch, resume);
    result.checkpoint.meta.finetune_mode = "none";
    return result;
}

TrainResult finetune_word_dependent(const model::Checkpoint& base,
                                    const dataset::DatasetManifest& manifest,
                                    const FeatureMap& features, int nonword_id,
                                    const TrainConfig& cfg) {
    if (cfg.finetune_mode == FinetuneMode::none)
        throw Error(Errc::mode_mismatch, "finetune requires a mode other than `none`");
    if (base.model.spec.nonword_id)
        throw Error(Errc::mode_mismatch, "base checkpoint is already word-dependent (nonword " +
                                             std::to_string(*base.model.spec.nonword_id) + ")");
    if (nonword_id < 1 || nonword_id > 7)
        throw Error(Errc::bad_nonword_id, "nonword_id " + std::to_string(nonword_id));

    const Prepared prep = prepare(manifest, features, nonword_id);

    Model m;
    std::unordered_set<std::string> frozen;
    double lr = cfg.lr;
    const uint64_t word_seed = nn::mix_seed(cfg.seed, static_cast<uint64_t>(nonword_id));

    switch (cfg.finetune_mode) {
        case FinetuneMode::ft_last_layer: {
            m = base.model;
            for (const auto& l : m.spec.layers)
                if (l.name != "fc_out") frozen.insert(l.name);
            break;
        }
        case FinetuneMode::ft_all_layers: {
            m = base.model;
            lr = cfg.finetune_lr;
            break;
        }
        case FinetuneMode::ft_add_layer: {
            m = base.model;
            // locate the output head and splice dense(16)+relu in front of it
            size_t head = m.spec.layers.size();
            for (size_t i = m.spec.layers.size(); i-- > 0;) {
                if (m.spec.layers[i].kind == nn::LayerKind::dense) {
                    head = i;
                    break;
                }
            }
            if (head == m.spec.layers.size())
                throw Error(Errc::mode_mismatch, "base model has no dense head");
            const size_t head_in = m.spec.layers[head].in;
            std::vector<nn::LayerSpec> layers = m.spec.layers;
            layers[head].in = 16;
            layers.insert(layers.begin() + static_cast<std::ptrdiff_t>(head),
                          {nn::LayerKind::relu, "relu_ft"});
            layers.insert(layers.begin() + static_cast<std::ptrdiff_t>(head),
                          {nn::LayerKind::dense, "fc_ft", head_in, 16});
            m.spec.layers = layers;

            auto fresh = nn::init_params<float>(m.spec.layers, word_seed);
            std::vector<nn::LayerParams<float>> params(m.spec.layers.size());
            for (size_t i = 0; i < m.spec.layers.size(); ++i) {
                const auto& name = m.spec.layers[i].name;
                if (name == "fc_ft" || name == "relu_ft" || name == "fc_out") {
                    params[i] = fresh[i]; // new layer and re-shaped head start fresh
                } else {
                    // unchanged layers keep the pre-trained parameters
                    size_t src = i < head ? i : i - 2;
                    params[i] = base.model.params[src];
                }
            }
            m.params = std::move(params);
            for (const auto& l : m.spec.layers)
                if (l.name != "fc_ft" && l.name != "fc_out") frozen.insert(l.name);
            break;
        }
        case FinetuneMode::from_scratch: {
            m.spec = base.model.spec;
            m.params = nn::init_params<float>(m.spec.layers, word_seed);
            break;
        }
        case FinetuneMode::none:
            break; // unreachable
    }

    m.spec.nonword_id = nonword_id;

    LoopConfig loop{lr, cfg.max_epochs, cfg.patience, cfg.batch_size, cfg.seed};
    auto result = run_training(std::move(m), prep, loop, frozen, {}, nullptr);
    result.checkpoint.meta.finetune_mode = finetune_mode_name(cfg.finetune_mode);
    return result;
}

FeatureMap load_feature_dir(const std::string& dir, const dataset::DatasetManifest& manifest) {
    FeatureMap out;
    for (const auto& rec : manifest.records) {
        const std::string path =
            (std::filesystem::path(dir) / (rec.utterance_id + ".nwf1")).string();
        auto fm = dataset::ingest_features(path);
        fm.utterance_id = rec.utterance_id;
        out.emplace(rec.utterance_id, std::move(fm));
    }
    return out;
}

std::vector<SweepRow> sweep_feature_sets(const std::vector<std::string>& feature_dirs,
                                         const dataset::DatasetManifest& manifest,
                                         const TrainConfig& cfg) {
    std::vector<SweepRow> rows;
    for (const auto& dir : feature_dirs) {
        SweepRow row;
        row.feature_dir = dir;
        try {
            const auto features = load_feature_dir(dir, manifest);
            auto result = train_word_independent(manifest, features, cfg);
            eval::ModelSet models;
            models.shared = std::move(result.checkpoint.model);
            const auto report = eval::evaluate(models, manifest, features);
            row.support = report.aggregate.support;
            row.accuracy = report.aggregate.accuracy;
            row.precision = report.aggregate.precision;
            row.recall = report.aggregate.recall;
            row.auc = report.aggregate.auc;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "feature_dir,status,support,accuracy,precision,recall,auc,error\n";
    char buf[128];
    for (const auto& row : rows) {
        std::string err = row.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        std::snprintf(buf, sizeof buf, ",%zu,%.6f,%.6f,%.6f,%.6f,", row.support, row.accuracy,
                      row.precision, row.recall, row.auc);
        out << row.feature_dir << ',' << (row.failed ? "failed" : "ok") << buf << err << "\n";
    }
    return out.str();
}

} // namespace nonword::train
