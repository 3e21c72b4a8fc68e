#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdlab/model.hpp"
#include "mdlab/objective.hpp"
#include "mdlab/schedules.hpp"

namespace mdlab {

struct KeySpec {
    std::string key;
    std::string default_value;  // "" means unset; commands that need it will say so
    std::string unit;
    std::string description;
};

// Single source of truth for every run-config key. Help text and the
// resolved-config echo are generated from this list.
const std::vector<KeySpec>& config_keys();
std::string config_help_text();

// Flat key=value run configuration. '#' starts a comment line, blank lines
// are skipped, values keep any '=' after the first. Unknown keys are errors.
class Config {
  public:
    static Config defaults();
    static Config from_file(const std::string& path);  // ConfigError with key and line
    static Config from_text(const std::string& text, const std::string& origin);

    void set(const std::string& key, const std::string& value);  // ConfigError on unknown key
    void apply_override(const std::string& assignment);          // "key=value"

    bool is_set(const std::string& key) const;  // non-empty value
    const std::string& get_string(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // Set-or-default for every registered key, in registry order.
    std::string render_resolved() const;

    ScheduleKind schedule() const;
    // vocab_size_from_file replaces model.vocab_size when that key is 0.
    ModelConfig model_config(int vocab_size_from_file) const;
    PZeroMode p_zero_mode() const;

  private:
    const std::string& raw(const std::string& key) const;
    std::map<std::string, std::string> values_;
};

}  // namespace mdlab
