#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace nonword::cli {

/// Layered `key = value` run configuration: defaults < config file < flags.
/// Unknown keys are rejected. A resolved snapshot of every key is written
/// next to each run's outputs and reproduces the run when fed back.
class RunConfig {
public:
    RunConfig();

    void apply_file(const std::string& path);
    void apply_assignment(const std::string& key_eq_value); // "key=value"
    void set(const std::string& key, const std::string& value);

    bool was_provided(const std::string& key) const { return provided_.count(key) > 0; }

    std::string get_string(const std::string& key) const;
    long long get_int(const std::string& key) const;
    unsigned long long get_uint(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string snapshot() const;

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
    std::set<std::string> provided_;
};

} // namespace nonword::cli
