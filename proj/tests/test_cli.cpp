// Process-level tests against the built CLI binary (path in $NONWORD_CLI).
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "nonword/audio.hpp"
#include "nonword/dataset.hpp"
#include "nonword/model.hpp"

using namespace nonword;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("NONWORD_CLI");
    REQUIRE_MESSAGE(p != nullptr, "NONWORD_CLI must point at the built binary");
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    const std::string missing = "missing file " + p.string();
    REQUIRE_MESSAGE(in.good(), missing);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// three tone utterances plus an optional silent one
void write_corpus(const fs::path& dir, bool include_silent) {
    dataset::DatasetManifest m;
    int word = 1;
    for (const std::string id : {"utt_a", "utt_b", "utt_c"}) {
        auto clip = fixtures::concat({fixtures::silence(0.2),
                                      fixtures::sine(400.0 + 100 * word, 0.6),
                                      fixtures::silence(0.2)});
        audio::write_wav_file((dir / (id + ".wav")).string(), clip);
        dataset::UtteranceRecord r;
        r.utterance_id = id;
        r.speaker_id = "spk1";
        r.nonword_id = word++;
        r.label = dataset::Label::correct;
        r.path = id + ".wav";
        m.records.push_back(r);
    }
    if (include_silent) {
        audio::write_wav_file((dir / "utt_silent.wav").string(), fixtures::silence(1.0));
        dataset::UtteranceRecord r;
        r.utterance_id = "utt_silent";
        r.speaker_id = "spk2";
        r.nonword_id = 1;
        r.label = dataset::Label::incorrect;
        r.path = "utt_silent.wav";
        m.records.push_back(r);
    }
    dataset::write_manifest_file((dir / "manifest.csv").string(), m);
}

} // namespace

TEST_CASE("preprocess trims every valid file and reports skips") {
    SUBCASE("all valid") {
        TempDir dir("nonword_cli_pre1");
        write_corpus(dir.path, false);
        const fs::path out = dir.path / "out";
        CHECK(run_cli("preprocess --manifest " + (dir.path / "manifest.csv").string() +
                      " --out-dir " + out.string()) == 0);
        for (const std::string id : {"utt_a", "utt_b", "utt_c"})
            CHECK(fs::exists(out / (id + ".wav")));
        CHECK(slurp(out / "skipped.csv") == "utterance_id,reason\n");
        auto m = dataset::read_manifest_file((out / "manifest.csv").string());
        CHECK(m.records.size() == 3);
    }
    SUBCASE("silent file is skipped, batch continues, exit 1") {
        TempDir dir("nonword_cli_pre2");
        write_corpus(dir.path, true);
        const fs::path out = dir.path / "out";
        CHECK(run_cli("preprocess --manifest " + (dir.path / "manifest.csv").string() +
                      " --out-dir " + out.string()) == 1);
        CHECK(fs::exists(out / "utt_a.wav"));
        CHECK_FALSE(fs::exists(out / "utt_silent.wav"));
        const std::string skip = slurp(out / "skipped.csv");
        CHECK(skip.find("utt_silent") != std::string::npos);
        CHECK(skip.find("NoSpeechDetected") != std::string::npos);
    }
}

TEST_CASE("preprocess re-runs are bit-identical") {
    TempDir dir("nonword_cli_pre3");
    write_corpus(dir.path, false);
    const fs::path out1 = dir.path / "out1";
    const fs::path out2 = dir.path / "out2";
    const std::string base = "preprocess --manifest " + (dir.path / "manifest.csv").string();
    REQUIRE(run_cli(base + " --out-dir " + out1.string()) == 0);
    REQUIRE(run_cli(base + " --out-dir " + out2.string()) == 0);
    for (const std::string id : {"utt_a", "utt_b", "utt_c"})
        CHECK(slurp(out1 / (id + ".wav")) == slurp(out2 / (id + ".wav")));
    CHECK(slurp(out1 / "manifest.csv") == slurp(out2 / "manifest.csv"));
}

TEST_CASE("extract writes NWF1 mel features that parse back") {
    TempDir dir("nonword_cli_ext1");
    write_corpus(dir.path, false);
    const fs::path pre = dir.path / "pre";
    const fs::path feat = dir.path / "feat";
    REQUIRE(run_cli("preprocess --manifest " + (dir.path / "manifest.csv").string() +
                    " --out-dir " + pre.string()) == 0);
    CHECK(run_cli("extract --manifest " + (pre / "manifest.csv").string() + " --out-dir " +
                  feat.string()) == 0);
    CHECK_FALSE(fs::exists(feat / "warp_factors.csv")); // no --vtln

    for (const std::string id : {"utt_a", "utt_b", "utt_c"}) {
        auto fm = dataset::ingest_features((feat / (id + ".nwf1")).string());
        CHECK(fm.kind == features::FeatureKind::mel);
        CHECK(fm.dims == 128);
        CHECK(fm.hop_seconds == 0.010);
        CHECK(fm.frames > 30);
    }
}

TEST_CASE("extract with VTLN emits per-speaker warp factors") {
    TempDir dir("nonword_cli_ext2");

    dataset::DatasetManifest m;
    int idx = 0;
    for (const auto& [spk, f0] : std::vector<std::pair<std::string, double>>{
             {"low", 200.0}, {"high", 280.0}}) {
        for (int k = 0; k < 2; ++k) {
            const std::string id = spk + "_" + std::to_string(k);
            audio::write_wav_file((dir.path / (id + ".wav")).string(),
                                  fixtures::sine(f0, 0.6));
            dataset::UtteranceRecord r;
            r.utterance_id = id;
            r.speaker_id = spk;
            r.nonword_id = ++idx;
            r.label = dataset::Label::correct;
            r.path = id + ".wav";
            m.records.push_back(r);
        }
    }
    dataset::write_manifest_file((dir.path / "manifest.csv").string(), m);

    const fs::path out = dir.path / "out";
    SUBCASE("missing reference f0 is fatal") {
        CHECK(run_cli("extract --manifest " + (dir.path / "manifest.csv").string() +
                      " --out-dir " + out.string() + " --vtln") == 2);
    }
    SUBCASE("alphas follow the f0 ratio") {
        REQUIRE(run_cli("extract --manifest " + (dir.path / "manifest.csv").string() +
                        " --out-dir " + out.string() + " --vtln --reference-f0 200") == 0);
        const std::string csv = slurp(out / "warp_factors.csv");
        CHECK(csv.rfind("speaker_id,mean_f0_hz,alpha\n", 0) == 0);

        double low_alpha = 0, high_alpha = 0;
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            const auto c1 = line.find(','), c2 = line.rfind(',');
            const std::string spk = line.substr(0, c1);
            const double alpha = std::stod(line.substr(c2 + 1));
            (spk == "low" ? low_alpha : high_alpha) = alpha;
        }
        CHECK(low_alpha == doctest::Approx(1.0).epsilon(0.005));
        CHECK(high_alpha == doctest::Approx(1.4).epsilon(0.005));
    }
}

TEST_CASE("unknown config keys are rejected") {
    TempDir dir("nonword_cli_cfg1");
    write_corpus(dir.path, false);
    std::ofstream(dir.path / "bad.cfg") << "no_such_key = 1\n";
    CHECK(run_cli("preprocess --config " + (dir.path / "bad.cfg").string() + " --manifest " +
                  (dir.path / "manifest.csv").string() + " --out-dir " +
                  (dir.path / "out").string()) == 2);
}

TEST_CASE("unreadable manifest is fatal") {
    TempDir dir("nonword_cli_cfg2");
    CHECK(run_cli("preprocess --manifest " + (dir.path / "missing.csv").string() +
                  " --out-dir " + (dir.path / "out").string()) == 2);
}

namespace {

// utterance-embedding corpus on disk: exercises the fast MLP training path
void write_embedding_corpus(const fs::path& dir, int per_class, int n_words) {
    fs::create_directories(dir / "feat");
    dataset::DatasetManifest m;
    std::mt19937_64 rng(99);
    int counter = 0;
    for (int word = 1; word <= n_words; ++word) {
        for (int i = 0; i < 2 * per_class; ++i) {
            const bool incorrect = i >= per_class;
            dataset::UtteranceRecord r;
            r.utterance_id = "e" + std::to_string(counter++);
            r.speaker_id = "s" + std::to_string(counter % 6);
            r.nonword_id = word;
            r.label = incorrect ? dataset::Label::incorrect : dataset::Label::correct;
            r.path = r.utterance_id + ".nwf1";

            features::FeatureMatrix fm;
            fm.frames = 1;
            fm.dims = 192;
            fm.kind = features::FeatureKind::utterance_embedding;
            fm.utterance_id = r.utterance_id;
            fm.data.resize(192);
            for (auto& v : fm.data) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                v = (incorrect ? 0.7f : -0.7f) + static_cast<float>(u - 0.5) * 0.4f;
            }
            dataset::write_features((dir / "feat" / r.path).string(), fm);
            m.records.push_back(r);
        }
    }
    dataset::write_manifest_file((dir / "manifest.csv").string(), m);
}

} // namespace

TEST_CASE("train, finetune and evaluate compose over the CLI") {
    TempDir dir("nonword_cli_train1");
    write_embedding_corpus(dir.path, 16, 2);
    const fs::path feat = dir.path / "feat";
    const fs::path train_out = dir.path / "train";
    const std::string common = " --features " + feat.string() + " --seed 5 --max-epochs 8 "
                               "--patience 8 ";

    REQUIRE(run_cli("train --manifest " + (dir.path / "manifest.csv").string() + common +
                    " --out-dir " + train_out.string()) == 0);
    CHECK(fs::exists(train_out / "word_independent.nwck"));
    CHECK(fs::exists(train_out / "train_log.csv"));
    CHECK(fs::exists(train_out / "manifest_split.csv")); // split applied on demand

    const std::string split = (train_out / "manifest_split.csv").string();
    const fs::path ft_out = dir.path / "ft";
    REQUIRE(run_cli("finetune --manifest " + split + common + " --checkpoint " +
                    (train_out / "word_independent.nwck").string() +
                    " --mode from-scratch --nonword 1 --out-dir " + ft_out.string()) == 0);
    CHECK(fs::exists(ft_out / "word_1.nwck"));
    CHECK_FALSE(fs::exists(ft_out / "word_2.nwck")); // only the requested word

    const fs::path eval_out = dir.path / "eval";
    REQUIRE(run_cli("evaluate --manifest " + split + common + " --checkpoint " +
                    (train_out / "word_independent.nwck").string() + " --out-dir " +
                    eval_out.string()) == 0);
    const std::string csv = slurp(eval_out / "eval_report.csv");
    CHECK(csv.rfind("nonword_id,support,accuracy,precision,recall,auc,flags\n", 0) == 0);
    CHECK(csv.find("\nall,") != std::string::npos);
    CHECK(fs::exists(eval_out / "eval_report.json"));

    SUBCASE("finetune without --mode is fatal") {
        CHECK(run_cli("finetune --manifest " + split + common + " --checkpoint " +
                      (train_out / "word_independent.nwck").string() + " --nonword 1 --out-dir " +
                      (dir.path / "ft2").string()) == 2);
    }
}

TEST_CASE("VTLN-warped features feed the training stage") {
    TempDir dir("nonword_cli_vtln_train");

    // two synthetic speakers, distinct f0, tones separable by label
    dataset::DatasetManifest m;
    std::mt19937_64 rng(3);
    int counter = 0;
    for (const auto& [spk, f0] : std::vector<std::pair<std::string, double>>{
             {"low", 210.0}, {"high", 260.0}}) {
        for (int i = 0; i < 10; ++i) {
            const bool incorrect = i % 2 == 1;
            dataset::UtteranceRecord r;
            r.utterance_id = spk + "_" + std::to_string(counter++);
            r.speaker_id = spk;
            r.nonword_id = 1;
            r.label = incorrect ? dataset::Label::incorrect : dataset::Label::correct;
            r.path = r.utterance_id + ".wav";
            auto clip = fixtures::concat(
                {fixtures::sine(f0, 0.2),
                 fixtures::sine(incorrect ? 1800.0 : 900.0, 0.4, 16000, 0.8f)});
            audio::write_wav_file((dir.path / r.path).string(), clip);
            m.records.push_back(r);
        }
    }
    dataset::write_manifest_file((dir.path / "manifest.csv").string(), m);

    const fs::path feat = dir.path / "feat";
    REQUIRE(run_cli("extract --manifest " + (dir.path / "manifest.csv").string() +
                    " --out-dir " + feat.string() + " --vtln --reference-f0 220") == 0);
    CHECK(fs::exists(feat / "warp_factors.csv"));

    const fs::path train_out = dir.path / "train";
    REQUIRE(run_cli("train --manifest " + (feat / "manifest.csv").string() + " --features " +
                    feat.string() + " --seed 2 --max-epochs 3 --patience 3 --out-dir " +
                    train_out.string()) == 0);
    CHECK(fs::exists(train_out / "word_independent.nwck"));

    auto ckpt = model::read_checkpoint_file((train_out / "word_independent.nwck").string());
    CHECK(ckpt.model.spec.feature_kind == features::FeatureKind::mel);
    CHECK(ckpt.model.spec.input_shape[2] == 128);
}

TEST_CASE("sweep writes one row per feature dir over the CLI") {
    TempDir dir("nonword_cli_sweep1");
    write_embedding_corpus(dir.path, 12, 1);
    const fs::path out = dir.path / "out";
    const std::string feat = (dir.path / "feat").string();
    REQUIRE(run_cli("sweep --manifest " + (dir.path / "manifest.csv").string() +
                    " --feature-dirs " + feat + "," + feat + " --seed 3 --max-epochs 5 "
                    "--patience 5 --out-dir " + out.string()) == 0);
    const std::string csv = slurp(out / "sweep.csv");
    CHECK(csv.rfind("feature_dir,status,", 0) == 0);
    size_t rows = 0;
    for (char ch : csv)
        if (ch == '\n') ++rows;
    CHECK(rows == 3); // header + two sets
}

TEST_CASE("the resolved config snapshot reproduces the run") {
    TempDir dir("nonword_cli_cfg3");
    write_corpus(dir.path, false);
    const fs::path out1 = dir.path / "out1";
    const fs::path out2 = dir.path / "out2";
    REQUIRE(run_cli("preprocess --manifest " + (dir.path / "manifest.csv").string() +
                    " --out-dir " + out1.string() + " --vad-floor-db -30") == 0);
    // feed the snapshot back, overriding only the output directory
    REQUIRE(run_cli("preprocess --config " + (out1 / "resolved_config.txt").string() +
                    " --out-dir " + out2.string()) == 0);
    for (const std::string id : {"utt_a", "utt_b", "utt_c"})
        CHECK(slurp(out1 / (id + ".wav")) == slurp(out2 / (id + ".wav")));

    const std::string snap = slurp(out1 / "resolved_config.txt");
    CHECK(snap.find("vad_energy_floor_db = -30") != std::string::npos);
}

TEST_CASE("--set overrides arbitrary config keys") {
    TempDir dir("nonword_cli_cfg4");
    write_corpus(dir.path, false);
    const fs::path out = dir.path / "out";
    REQUIRE(run_cli("preprocess --manifest " + (dir.path / "manifest.csv").string() +
                    " --out-dir " + out.string() +
                    " --set vad_hangover_frames=2 --set jobs=1") == 0);
    const std::string snap = slurp(out / "resolved_config.txt");
    CHECK(snap.find("vad_hangover_frames = 2") != std::string::npos);
    CHECK(snap.find("jobs = 1") != std::string::npos);

    CHECK(run_cli("preprocess --manifest " + (dir.path / "manifest.csv").string() +
                  " --out-dir " + out.string() + " --set no_such=1") == 2);
}
