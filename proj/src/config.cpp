#include "mdlab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mdlab/errors.hpp"

namespace mdlab {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
    static const std::vector<KeySpec> keys = {
        {"corpus_path", "", "path", "text corpus, one document per line"},
        {"vocab_path", "", "path", "tokenizer vocabulary file"},
        {"freq_table_path", "", "path", "token frequency table (token_id<TAB>count)"},
        {"output_dir", "out", "path", "directory for logs, checkpoints and the resolved config"},
        {"pairs_path", "", "path", "minimal pairs TSV (good<TAB>bad, # comments)"},
        {"checkpoint_path", "", "path", "checkpoint to evaluate"},
        {"resume_from", "", "path", "checkpoint to resume training from"},
        {"seed", "", "integer", "master RNG seed; required wherever sampling happens"},

        {"model.layers", "4", "count", "transformer blocks"},
        {"model.hidden_dim", "256", "count", "residual stream width"},
        {"model.heads", "4", "count", "attention heads (must divide hidden_dim)"},
        {"model.ffn_dim", "1024", "count", "feed-forward inner width"},
        {"model.vocab_size", "0", "count", "0 derives it from the vocabulary file"},
        {"model.max_seq_len", "128", "count", "longest sequence the model accepts"},
        {"model.timestep_dim", "128", "count", "sinusoidal time feature width (even)"},
        {"model.time_conditioning", "true", "flag", "feed diffusion time into the modulation path"},

        {"schedule.type", "cosine", "enum", "linear | cosine | simple_gaussian | bimodal_gaussian"},
        {"schedule.mean", "0.3", "probability", "simple_gaussian mean masking rate"},
        {"schedule.stddev", "0.1", "probability", "simple_gaussian spread"},
        {"schedule.w1", "0.6", "probability", "bimodal left-mode weight"},
        {"schedule.mu1", "0.12", "probability", "bimodal left-mode mean"},
        {"schedule.sigma1", "0.02", "probability", "bimodal left-mode spread"},
        {"schedule.mu2_lo", "0.4", "probability", "bimodal right-mode mean at progress 0"},
        {"schedule.mu2_hi", "0.85", "probability", "bimodal right-mode asymptote"},
        {"schedule.sigma2", "0.08", "probability", "bimodal right-mode spread"},
        {"schedule.clamp_epsilon", "1e-4", "probability", "masking-rate clamp margin"},

        {"masking.p_max", "0.02", "exponent", "frequency-weight softening power at end of training"},
        {"objective.derivative_power", "1.0", "exponent", "power on |alpha'| in the loss weight"},
        {"objective.p_zero_mode", "keep_rate_factor", "enum",
         "keep_rate_factor | unweighted: weight when derivative_power = 0"},

        {"train.epochs", "10", "count", "passes over the segment list"},
        {"train.batch_size", "16", "count", "sequences per optimizer step"},
        {"train.seq_len", "128", "count", "segment length (PAD-filled tails)"},
        {"train.peak_lr", "3e-4", "rate", "learning-rate peak after warmup"},
        {"train.warmup_frac", "0.01", "fraction", "share of steps spent ramping up"},
        {"train.lr_floor_frac", "0.1", "fraction", "cosine decay floor as a share of peak"},
        {"train.weight_decay", "0.01", "rate", "decoupled decay on weight matrices"},
        {"train.grad_clip", "1.0", "norm", "global gradient L2 clip (0 disables)"},
        {"train.adam_beta1", "0.9", "coefficient", "first-moment decay"},
        {"train.adam_beta2", "0.999", "coefficient", "second-moment decay"},
        {"train.adam_eps", "1e-8", "offset", "adaptive-step denominator guard"},
        {"train.log_every", "1", "steps", "CSV row cadence (first and last always logged)"},
        {"train.checkpoint_every", "0", "steps", "0 writes only the final checkpoint"},
        {"train.eval_every", "0", "steps", "minimal-pair eval cadence (0 off; needs pairs_path)"},

        {"eval.conditioning", "single_token", "enum", "none | single_token"},
        {"eval.sentences_path", "", "path", "sentences to score, one per line"},
        {"eval.tau", "1.0", "progress", "schedule progress assumed at evaluation"},

        {"stats.tau", "0.0", "progress", "schedule progress for schedule-stats"},
        {"stats.points", "101", "count", "interior t grid size for the schedule CSV"},
        {"stats.samples", "100000", "count", "Monte-Carlo draws for the mean masking rate"},

        {"preview.text", "", "text", "sentence shown by mask-preview"},
        {"preview.target_rate", "0.3", "probability", "masking rate used by mask-preview"},
        {"preview.power", "0.02", "exponent", "softening power used by mask-preview"},

        {"tokenizer.vocab_size", "2048", "count", "target vocabulary size for tokenizer-train"},
    };
    return keys;
}

std::string config_help_text() {
    std::ostringstream out;
    out << "Config keys (flat key=value file; # comments; unknown keys rejected):\n";
    for (const KeySpec& k : config_keys()) {
        out << "  " << k.key << " = "
            << (k.default_value.empty() ? "<unset>" : k.default_value) << "  [" << k.unit << "] "
            << k.description << "\n";
    }
    return out.str();
}

Config Config::defaults() {
    Config c;
    for (const KeySpec& k : config_keys()) {
        c.values_[k.key] = k.default_value;
    }
    return c;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return from_text(text.str(), path);
}

Config Config::from_text(const std::string& text, const std::string& origin) {
    Config c = defaults();
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') {
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + origin + ":" + std::to_string(line_no) +
                              ": expected key=value, got \"" + s + "\"");
        }
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (c.values_.find(key) == c.values_.end()) {
            throw ConfigError("config: " + origin + ":" + std::to_string(line_no) +
                              ": unknown key \"" + key + "\"");
        }
        c.values_[key] = value;
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("config: unknown key \"" + key + "\"");
    }
    it->second = value;
}

void Config::apply_override(const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("config: override \"" + assignment + "\" is not key=value");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("config: unknown key \"" + key + "\"");
    }
    return it->second;
}

bool Config::is_set(const std::string& key) const { return !raw(key).empty(); }

const std::string& Config::get_string(const std::string& key) const { return raw(key); }

int64_t Config::get_int(const std::string& key) const {
    const std::string& v = raw(key);
    if (v.empty()) {
        throw ConfigError("config: key \"" + key + "\" must be set");
    }
    char* end = nullptr;
    long long n = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: key \"" + key + "\": \"" + v + "\" is not an integer");
    }
    return n;
}

double Config::get_double(const std::string& key) const {
    const std::string& v = raw(key);
    if (v.empty()) {
        throw ConfigError("config: key \"" + key + "\" must be set");
    }
    char* end = nullptr;
    double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: key \"" + key + "\": \"" + v + "\" is not a number");
    }
    return d;
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError("config: key \"" + key + "\": \"" + v + "\" is not a flag");
}

std::string Config::render_resolved() const {
    std::ostringstream out;
    for (const KeySpec& k : config_keys()) {
        out << k.key << " = " << values_.at(k.key) << "\n";
    }
    return out.str();
}

ScheduleKind Config::schedule() const {
    const std::string& type = get_string("schedule.type");
    ScheduleKind kind;
    try {
        if (type == "linear") {
            kind = ScheduleKind::linear();
        } else if (type == "cosine") {
            kind = ScheduleKind::cosine();
        } else if (type == "simple_gaussian") {
            kind = ScheduleKind::simple_gaussian(get_double("schedule.mean"),
                                                 get_double("schedule.stddev"));
        } else if (type == "bimodal_gaussian") {
            kind = ScheduleKind::bimodal_gaussian(get_double("schedule.w1"),
                                                  get_double("schedule.mu1"),
                                                  get_double("schedule.sigma1"),
                                                  get_double("schedule.mu2_lo"),
                                                  get_double("schedule.mu2_hi"),
                                                  get_double("schedule.sigma2"));
        } else {
            throw ConfigError("config: schedule.type \"" + type + "\" is not a known schedule");
        }
        kind.clamp_epsilon = get_double("schedule.clamp_epsilon");
        kind.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return kind;
}

ModelConfig Config::model_config(int vocab_size_from_file) const {
    ModelConfig mc;
    mc.layers = static_cast<int>(get_int("model.layers"));
    mc.hidden_dim = static_cast<int>(get_int("model.hidden_dim"));
    mc.heads = static_cast<int>(get_int("model.heads"));
    mc.ffn_dim = static_cast<int>(get_int("model.ffn_dim"));
    int v = static_cast<int>(get_int("model.vocab_size"));
    mc.vocab_size = v > 0 ? v : vocab_size_from_file;
    mc.max_seq_len = static_cast<int>(get_int("model.max_seq_len"));
    mc.timestep_dim = static_cast<int>(get_int("model.timestep_dim"));
    mc.time_conditioning = get_bool("model.time_conditioning");
    try {
        mc.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return mc;
}

PZeroMode Config::p_zero_mode() const {
    const std::string& v = get_string("objective.p_zero_mode");
    if (v == "keep_rate_factor") {
        return PZeroMode::KeepRateFactor;
    }
    if (v == "unweighted") {
        return PZeroMode::Unweighted;
    }
    throw ConfigError("config: objective.p_zero_mode \"" + v + "\" is not a known mode");
}

}  // namespace mdlab
