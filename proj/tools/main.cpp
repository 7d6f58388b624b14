#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nonword/audio.hpp"
#include "nonword/dataset.hpp"
#include "nonword/error.hpp"
#include "nonword/eval.hpp"
#include "nonword/features.hpp"
#include "nonword/model.hpp"
#include "nonword/train.hpp"
#include "nonword/vad.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace nonword;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitFatal = 2;

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
    if (n == 0) return;
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    if (jobs == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(jobs));
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

std::string resolve_path(const fs::path& base_dir, const std::string& p) {
    fs::path pp(p);
    return pp.is_absolute() ? pp.string() : (base_dir / pp).string();
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    out << content;
}

void emit_snapshot(const cli::RunConfig& cfg, const fs::path& out_dir) {
    write_text(out_dir / "resolved_config.txt", cfg.snapshot());
}

vad::VadConfig vad_config(const cli::RunConfig& cfg) {
    vad::VadConfig v;
    v.frame_ms = static_cast<int>(cfg.get_int("vad_frame_ms"));
    v.hop_ms = static_cast<int>(cfg.get_int("vad_hop_ms"));
    v.energy_floor_db = cfg.get_double("vad_energy_floor_db");
    v.hangover_frames = static_cast<int>(cfg.get_int("vad_hangover_frames"));
    v.min_speech_frames = static_cast<int>(cfg.get_int("vad_min_speech_frames"));
    return v;
}

features::StftConfig stft_config(const cli::RunConfig& cfg) {
    features::StftConfig s;
    s.frame_ms = static_cast<int>(cfg.get_int("stft_frame_ms"));
    s.hop_ms = static_cast<int>(cfg.get_int("stft_hop_ms"));
    s.n_fft = static_cast<int>(cfg.get_int("stft_n_fft"));
    return s;
}

train::TrainConfig train_config(const cli::RunConfig& cfg) {
    train::TrainConfig t;
    t.lr = cfg.get_double("lr");
    t.max_epochs = static_cast<int>(cfg.get_int("max_epochs"));
    t.patience = static_cast<int>(cfg.get_int("patience"));
    t.batch_size = static_cast<int>(cfg.get_int("batch_size"));
    t.seed = cfg.get_uint("seed");
    t.finetune_mode = train::finetune_mode_from(cfg.get_string("finetune_mode"));
    t.finetune_lr = cfg.get_double("finetune_lr");
    return t;
}

dataset::Label positive_label(const cli::RunConfig& cfg) {
    const std::string v = cfg.get_string("positive_label");
    if (v == "correct") return dataset::Label::correct;
    if (v == "incorrect") return dataset::Label::incorrect;
    throw Error(Errc::bad_config, "positive_label must be correct|incorrect");
}

struct LoadedManifest {
    dataset::DatasetManifest manifest;
    fs::path dir; // record paths resolve against this
};

LoadedManifest load_manifest(const cli::RunConfig& cfg) {
    const std::string path = cfg.get_string("manifest");
    if (path.empty()) throw Error(Errc::bad_config, "manifest path required");
    LoadedManifest lm;
    lm.manifest = dataset::read_manifest_file(path);
    lm.manifest.positive_label = positive_label(cfg);
    lm.dir = fs::path(path).parent_path();
    return lm;
}

fs::path ensure_out_dir(const cli::RunConfig& cfg) {
    const std::string out = cfg.get_string("out_dir");
    if (out.empty()) throw Error(Errc::bad_config, "out_dir required");
    fs::create_directories(out);
    return out;
}

// Split on demand: fully unassigned manifests get the deterministic 75/25
// assignment; partially assigned ones are rejected.
void ensure_split(dataset::DatasetManifest& manifest, const cli::RunConfig& cfg,
                  const fs::path& out_dir) {
    size_t unassigned = 0;
    for (const auto& r : manifest.records)
        if (r.split == dataset::Split::unassigned) ++unassigned;
    if (unassigned == 0) return;
    if (unassigned != manifest.records.size())
        throw Error(Errc::bad_config, "manifest is partially split; assign all records or none");
    manifest = dataset::split_dataset(manifest, cfg.get_uint("seed"),
                                      cfg.get_bool("speaker_disjoint"));
    dataset::write_manifest_file((out_dir / "manifest_split.csv").string(), manifest);
}

std::string skip_report_csv(const std::vector<std::pair<std::string, std::string>>& skipped) {
    std::string out = "utterance_id,reason\n";
    for (const auto& [id, reason] : skipped) {
        std::string clean = reason;
        std::replace(clean.begin(), clean.end(), ',', ';');
        std::replace(clean.begin(), clean.end(), '\n', ' ');
        out += id + "," + clean + "\n";
    }
    return out;
}

int cmd_preprocess(const cli::RunConfig& cfg) {
    auto lm = load_manifest(cfg);
    const fs::path out_dir = ensure_out_dir(cfg);
    const auto vcfg = vad_config(cfg);
    const int jobs = static_cast<int>(cfg.get_int("jobs"));

    const size_t n = lm.manifest.records.size();
    std::vector<std::optional<std::string>> failure(n);
    parallel_for(n, jobs, [&](size_t i) {
        const auto& rec = lm.manifest.records[i];
        try {
            auto clip = audio::read_wav_file(resolve_path(lm.dir, rec.path), rec.utterance_id);
            clip = audio::resample(clip, audio::kCanonicalRate);
            auto trimmed = vad::trim(clip, vcfg);
            audio::write_wav_file((out_dir / (rec.utterance_id + ".wav")).string(), trimmed);
        } catch (const std::exception& e) {
            failure[i] = e.what();
        }
    });

    dataset::DatasetManifest out_manifest;
    out_manifest.positive_label = lm.manifest.positive_label;
    std::vector<std::pair<std::string, std::string>> skipped;
    for (size_t i = 0; i < n; ++i) {
        const auto& rec = lm.manifest.records[i];
        if (failure[i]) {
            skipped.emplace_back(rec.utterance_id, *failure[i]);
            continue;
        }
        auto out_rec = rec;
        out_rec.path = rec.utterance_id + ".wav";
        out_manifest.records.push_back(std::move(out_rec));
    }

    dataset::write_manifest_file((out_dir / "manifest.csv").string(), out_manifest);
    write_text(out_dir / "skipped.csv", skip_report_csv(skipped));
    emit_snapshot(cfg, out_dir);

    std::cout << "preprocess: " << out_manifest.records.size() << " trimmed, " << skipped.size()
              << " skipped\n";
    if (out_manifest.records.empty())
        throw Error(Errc::no_speech_detected, "no utterance produced output");
    return skipped.empty() ? kExitOk : kExitPartial;
}

int cmd_extract(const cli::RunConfig& cfg) {
    auto lm = load_manifest(cfg);
    const fs::path out_dir = ensure_out_dir(cfg);
    const auto scfg = stft_config(cfg);
    const size_t n_mels = static_cast<size_t>(cfg.get_int("n_mels"));
    const bool vtln = cfg.get_bool("vtln");
    const int jobs = static_cast<int>(cfg.get_int("jobs"));

    auto read_clip = [&lm](const dataset::UtteranceRecord& rec) {
        auto clip = audio::read_wav_file(resolve_path(lm.dir, rec.path), rec.utterance_id);
        return audio::resample(clip, audio::kCanonicalRate);
    };

    // Per-speaker warp factors, then one filterbank per speaker.
    std::map<std::string, features::WarpFactor> warps;
    if (vtln) {
        if (!cfg.was_provided("reference_f0_hz"))
            throw Error(Errc::bad_config, "--vtln requires --reference-f0");
        const double ref = cfg.get_double("reference_f0_hz");

        std::map<std::string, std::vector<const dataset::UtteranceRecord*>> by_speaker;
        for (const auto& rec : lm.manifest.records) by_speaker[rec.speaker_id].push_back(&rec);

        std::vector<std::string> speakers;
        for (const auto& [spk, recs] : by_speaker) speakers.push_back(spk);

        std::vector<features::WarpFactor> results(speakers.size());
        parallel_for(speakers.size(), jobs, [&](size_t i) {
            std::vector<audio::AudioClip> clips;
            for (const auto* rec : by_speaker.at(speakers[i])) {
                try {
                    clips.push_back(read_clip(*rec));
                } catch (const std::exception&) {
                    // unreadable clips surface in the extraction pass
                }
            }
            results[i] = features::compute_warp_factor(clips, ref, speakers[i]);
        });

        std::string csv = "speaker_id,mean_f0_hz,alpha\n";
        char buf[64];
        for (size_t i = 0; i < speakers.size(); ++i) {
            warps[speakers[i]] = results[i];
            std::snprintf(buf, sizeof buf, ",%.4f,%.6f\n", results[i].mean_f0_hz,
                          results[i].alpha);
            csv += speakers[i] + buf;
            if (results[i].no_voiced_frames)
                std::cerr << "warning: no voiced frames for speaker " << speakers[i]
                          << "; using alpha 1.0\n";
        }
        write_text(out_dir / "warp_factors.csv", csv);
    }

    std::map<std::string, features::MelFilterbank> banks;
    const auto default_bank =
        features::build_mel_filterbank(audio::kCanonicalRate, scfg.n_fft, n_mels, 1.0);
    for (const auto& [spk, wf] : warps)
        banks.emplace(spk, features::build_mel_filterbank(audio::kCanonicalRate, scfg.n_fft,
                                                          n_mels, wf.alpha));

    const size_t n = lm.manifest.records.size();
    std::vector<std::optional<std::string>> failure(n);
    parallel_for(n, jobs, [&](size_t i) {
        const auto& rec = lm.manifest.records[i];
        try {
            const auto clip = read_clip(rec);
            auto it = banks.find(rec.speaker_id);
            const auto& bank = it != banks.end() ? it->second : default_bank;
            auto fm = features::mel_spectrogram(clip, scfg, bank);
            fm.utterance_id = rec.utterance_id;
            dataset::write_features((out_dir / (rec.utterance_id + ".nwf1")).string(), fm);
        } catch (const std::exception& e) {
            failure[i] = e.what();
        }
    });

    dataset::DatasetManifest out_manifest;
    out_manifest.positive_label = lm.manifest.positive_label;
    std::vector<std::pair<std::string, std::string>> skipped;
    for (size_t i = 0; i < n; ++i) {
        const auto& rec = lm.manifest.records[i];
        if (failure[i]) {
            skipped.emplace_back(rec.utterance_id, *failure[i]);
            continue;
        }
        auto out_rec = rec;
        out_rec.path = rec.utterance_id + ".nwf1";
        out_manifest.records.push_back(std::move(out_rec));
    }

    dataset::write_manifest_file((out_dir / "manifest.csv").string(), out_manifest);
    write_text(out_dir / "skipped.csv", skip_report_csv(skipped));
    emit_snapshot(cfg, out_dir);

    std::cout << "extract: " << out_manifest.records.size() << " feature files, "
              << skipped.size() << " skipped\n";
    if (out_manifest.records.empty())
        throw Error(Errc::clip_too_short, "no utterance produced features");
    return skipped.empty() ? kExitOk : kExitPartial;
}

int cmd_train(const cli::RunConfig& cfg) {
    auto lm = load_manifest(cfg);
    const fs::path out_dir = ensure_out_dir(cfg);
    ensure_split(lm.manifest, cfg, out_dir);

    const std::string features_dir = cfg.get_string("features_dir");
    if (features_dir.empty()) throw Error(Errc::bad_config, "features_dir required");
    const auto features = train::load_feature_dir(features_dir, lm.manifest);

    const auto tcfg = train_config(cfg);
    auto result = train::train_word_independent(lm.manifest, features, tcfg);

    model::write_checkpoint_file((out_dir / "word_independent.nwck").string(),
                                 result.checkpoint);
    write_text(out_dir / "train_log.csv", train::train_log_to_csv(result.log));
    emit_snapshot(cfg, out_dir);

    std::cout << "train: " << result.log.epochs.size() << " epochs, best epoch "
              << result.log.best_epoch << " (" << result.log.stop_reason << ")\n";
    return kExitOk;
}

std::vector<int> words_in(const dataset::DatasetManifest& manifest) {
    std::set<int> w;
    for (const auto& r : manifest.records) w.insert(r.nonword_id);
    return {w.begin(), w.end()};
}

int cmd_finetune(const cli::RunConfig& cfg) {
    auto lm = load_manifest(cfg);
    const fs::path out_dir = ensure_out_dir(cfg);
    ensure_split(lm.manifest, cfg, out_dir);

    const std::string ckpt_path = cfg.get_string("checkpoint");
    if (ckpt_path.empty()) throw Error(Errc::bad_config, "checkpoint required");
    const auto base = model::read_checkpoint_file(ckpt_path);

    const std::string features_dir = cfg.get_string("features_dir");
    if (features_dir.empty()) throw Error(Errc::bad_config, "features_dir required");
    const auto features = train::load_feature_dir(features_dir, lm.manifest);

    const auto tcfg = train_config(cfg);
    if (tcfg.finetune_mode == train::FinetuneMode::none)
        throw Error(Errc::mode_mismatch, "--mode required (ft-last-layer, ft-all-layers, "
                                         "ft-add-layer, from-scratch)");

    std::vector<int> words;
    const std::string which = cfg.get_string("nonword");
    if (which == "all") {
        words = words_in(lm.manifest);
    } else {
        words.push_back(static_cast<int>(cfg.get_int("nonword")));
    }

    for (int word : words) {
        auto result = train::finetune_word_dependent(base, lm.manifest, features, word, tcfg);
        const std::string stem = "word_" + std::to_string(word);
        model::write_checkpoint_file((out_dir / (stem + ".nwck")).string(), result.checkpoint);
        write_text(out_dir / ("train_log_" + stem + ".csv"),
                   train::train_log_to_csv(result.log));
        std::cout << "finetune " << stem << ": " << result.log.epochs.size()
                  << " epochs, best epoch " << result.log.best_epoch << "\n";
    }
    emit_snapshot(cfg, out_dir);
    return kExitOk;
}

int cmd_evaluate(const cli::RunConfig& cfg) {
    auto lm = load_manifest(cfg);
    const fs::path out_dir = ensure_out_dir(cfg);

    const std::string features_dir = cfg.get_string("features_dir");
    if (features_dir.empty()) throw Error(Errc::bad_config, "features_dir required");
    const auto features = train::load_feature_dir(features_dir, lm.manifest);

    eval::ModelSet models;
    const std::string ckpt = cfg.get_string("checkpoint");
    const std::string ckpt_dir = cfg.get_string("checkpoint_dir");
    if (ckpt.empty() && ckpt_dir.empty())
        throw Error(Errc::bad_config, "checkpoint or checkpoint_dir required");
    if (!ckpt.empty()) models.shared = model::read_checkpoint_file(ckpt).model;
    if (!ckpt_dir.empty()) {
        for (int word = 1; word <= 7; ++word) {
            const fs::path p = fs::path(ckpt_dir) / ("word_" + std::to_string(word) + ".nwck");
            if (fs::exists(p)) models.per_word.emplace(word, model::read_checkpoint_file(p.string()).model);
        }
        if (models.per_word.empty() && !models.shared)
            throw Error(Errc::missing_model_for_word, "no word_<k>.nwck files in " + ckpt_dir);
    }

    const auto report = eval::evaluate(models, lm.manifest, features, cfg.get_double("threshold"));
    write_text(out_dir / "eval_report.csv", eval::report_to_csv(report));
    write_text(out_dir / "eval_report.json", eval::report_to_json(report));
    emit_snapshot(cfg, out_dir);

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "evaluate: support=%zu accuracy=%.4f precision=%.4f recall=%.4f auc=%.4f\n",
                  report.aggregate.support, report.aggregate.accuracy, report.aggregate.precision,
                  report.aggregate.recall, report.aggregate.auc);
    std::cout << buf;
    return kExitOk;
}

int cmd_sweep(const cli::RunConfig& cfg) {
    auto lm = load_manifest(cfg);
    const fs::path out_dir = ensure_out_dir(cfg);
    ensure_split(lm.manifest, cfg, out_dir);

    std::vector<std::string> dirs;
    {
        std::string raw = cfg.get_string("feature_dirs");
        std::string cur;
        for (char c : raw) {
            if (c == ',') {
                if (!cur.empty()) dirs.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) dirs.push_back(cur);
    }
    if (dirs.empty()) throw Error(Errc::bad_config, "feature_dirs required (comma-separated)");

    const auto rows = train::sweep_feature_sets(dirs, lm.manifest, train_config(cfg));
    write_text(out_dir / "sweep.csv", train::sweep_to_csv(rows));
    emit_snapshot(cfg, out_dir);

    size_t failed = 0;
    for (const auto& row : rows) {
        if (row.failed) ++failed;
        std::cout << "sweep " << row.feature_dir << ": "
                  << (row.failed ? "failed (" + row.error + ")"
                                 : "auc=" + std::to_string(row.auc))
                  << "\n";
    }
    if (failed == rows.size()) throw Error(Errc::bad_config, "every feature set failed");
    return failed == 0 ? kExitOk : kExitPartial;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonword pronunciation classification pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;

    auto attach_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value run configuration file");
        sub->add_option_function<std::vector<std::string>>(
            "--set", [&overrides](const std::vector<std::string>& kvs) {
                for (const auto& kv : kvs) {
                    const size_t eq = kv.find('=');
                    if (eq == std::string::npos)
                        throw CLI::ValidationError("--set", "expected key=value");
                    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
                }
            },
            "override any config key (key=value, repeatable)");
        auto opt = [&, sub](const char* flag, const char* key, const char* desc) {
            sub->add_option_function<std::string>(
                flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
                desc);
        };
        opt("--manifest", "manifest", "dataset manifest CSV");
        opt("--out-dir", "out_dir", "output directory");
        opt("--features", "features_dir", "directory of <utterance_id>.nwf1 files");
        opt("--checkpoint", "checkpoint", "model checkpoint file");
        opt("--checkpoint-dir", "checkpoint_dir", "directory of word_<k>.nwck checkpoints");
        opt("--feature-dirs", "feature_dirs", "comma-separated feature directories (sweep)");
        opt("--seed", "seed", "PRNG seed");
        opt("--jobs", "jobs", "parallel workers (0 = hardware)");
        opt("--threshold", "threshold", "decision threshold");
        opt("--vad-floor-db", "vad_energy_floor_db", "VAD energy floor (dB re peak)");
        opt("--reference-f0", "reference_f0_hz", "reference f0 for VTLN warp factors");
        opt("--mode", "finetune_mode",
            "finetune mode: ft-last-layer|ft-all-layers|ft-add-layer|from-scratch");
        opt("--nonword", "nonword", "nonword id 1..7 or `all`");
        opt("--lr", "lr", "learning rate");
        opt("--max-epochs", "max_epochs", "epoch budget");
        opt("--patience", "patience", "early-stopping patience");
        opt("--batch-size", "batch_size", "mini-batch size");
        opt("--finetune-lr", "finetune_lr", "learning rate for ft-all-layers");
        sub->add_flag_callback(
            "--vtln", [&overrides] { overrides.emplace_back("vtln", "true"); },
            "apply per-speaker VTLN warping");
        sub->add_flag_callback(
            "--speaker-disjoint",
            [&overrides] { overrides.emplace_back("speaker_disjoint", "true"); },
            "split by speaker groups");
    };

    CLI::App* preprocess = app.add_subcommand("preprocess", "decode, resample and VAD-trim audio");
    CLI::App* extract = app.add_subcommand("extract", "mel spectrogram extraction (NWF1)");
    CLI::App* train_cmd = app.add_subcommand("train", "train the word-independent model");
    CLI::App* finetune = app.add_subcommand("finetune", "word-dependent fine-tuning");
    CLI::App* evaluate = app.add_subcommand("evaluate", "per-nonword evaluation report");
    CLI::App* sweep = app.add_subcommand("sweep", "compare feature sets (one model per dir)");
    for (CLI::App* sub : {preprocess, extract, train_cmd, finetune, evaluate, sweep})
        attach_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        cli::RunConfig cfg;
        if (!config_path.empty()) cfg.apply_file(config_path);
        for (const auto& [k, v] : overrides) cfg.set(k, v);

        if (preprocess->parsed()) return cmd_preprocess(cfg);
        if (extract->parsed()) return cmd_extract(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (finetune->parsed()) return cmd_finetune(cfg);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (sweep->parsed()) return cmd_sweep(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
