#include "run_config.hpp"

#include <fstream>

#include "nonword/error.hpp"

namespace nonword::cli {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

RunConfig::RunConfig() {
    const std::pair<const char*, const char*> defaults[] = {
        {"manifest", ""},
        {"features_dir", ""},
        {"feature_dirs", ""}, // comma-separated, sweep only
        {"out_dir", ""},
        {"checkpoint", ""},
        {"checkpoint_dir", ""},
        {"reference_f0_hz", "145"},
        {"vtln", "false"},
        {"vad_frame_ms", "25"},
        {"vad_hop_ms", "10"},
        {"vad_energy_floor_db", "-35"},
        {"vad_hangover_frames", "5"},
        {"vad_min_speech_frames", "5"},
        {"stft_frame_ms", "25"},
        {"stft_hop_ms", "10"},
        {"stft_n_fft", "512"},
        {"n_mels", "128"},
        {"lr", "0.001"},
        {"max_epochs", "100"},
        {"patience", "10"},
        {"batch_size", "16"},
        {"seed", "0"},
        {"finetune_mode", "none"},
        {"finetune_lr", "1e-05"},
        {"speaker_disjoint", "false"},
        {"positive_label", "incorrect"},
        {"threshold", "0.5"},
        {"nonword", "all"},
        {"jobs", "0"}, // 0 = hardware concurrency
    };
    for (const auto& [k, v] : defaults) {
        order_.push_back(k);
        values_[k] = v;
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(Errc::bad_config, "unknown config key `" + key + "`");
    it->second = value;
    provided_.insert(key);
}

void RunConfig::apply_assignment(const std::string& key_eq_value) {
    const size_t eq = key_eq_value.find('=');
    if (eq == std::string::npos)
        throw Error(Errc::bad_config, "expected key=value, got `" + key_eq_value + "`");
    set(trim(key_eq_value.substr(0, eq)), trim(key_eq_value.substr(eq + 1)));
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open config " + path);
    std::string line;
    size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::bad_config,
                        path + ":" + std::to_string(n) + ": expected `key = value`");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

std::string RunConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(Errc::bad_config, "unknown config key `" + key + "`");
    return it->second;
}

long long RunConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        size_t pos = 0;
        long long r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw Error(Errc::bad_config, key + " must be an integer, got `" + v + "`");
    }
}

unsigned long long RunConfig::get_uint(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        size_t pos = 0;
        unsigned long long r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw Error(Errc::bad_config, key + " must be a non-negative integer, got `" + v + "`");
    }
}

double RunConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw Error(Errc::bad_config, key + " must be a number, got `" + v + "`");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error(Errc::bad_config, key + " must be true/false, got `" + v + "`");
}

std::string RunConfig::snapshot() const {
    std::string out;
    for (const auto& k : order_) {
        out += k;
        out += " = ";
        out += values_.at(k);
        out += "\n";
    }
    return out;
}

} // namespace nonword::cli
