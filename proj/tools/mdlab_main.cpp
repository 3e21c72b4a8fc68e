#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mdlab/config.hpp"
#include "mdlab/errors.hpp"
#include "mdlab/eval.hpp"
#include "mdlab/masking.hpp"
#include "mdlab/model.hpp"
#include "mdlab/schedules.hpp"
#include "mdlab/special_tokens.hpp"
#include "mdlab/tokenizer.hpp"
#include "mdlab/trainer.hpp"

namespace {

using namespace mdlab;

constexpr uint64_t kInitStreamSalt = 0x243f6a8885a308d3ull;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "run-config file (key = value lines)");
    sub->add_option("--set", args.overrides, "override a config key, e.g. --set train.epochs=2")
        ->take_all();
}

Config resolve(const CommonArgs& args) {
    Config c = args.config_path.empty() ? Config::defaults() : Config::from_file(args.config_path);
    for (const std::string& o : args.overrides) {
        c.apply_override(o);
    }
    return c;
}

void require(const Config& c, const std::string& key, const std::string& subcommand) {
    if (!c.is_set(key)) {
        throw ConfigError("config: " + key + " is required for " + subcommand);
    }
}

// Every run leaves its fully resolved configuration next to its outputs.
std::string echo_config(const Config& c) {
    const std::string dir = c.get_string("output_dir");
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/resolved_config.txt";
    std::string text = c.render_resolved();
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    out << text;
    return text;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    return lines;
}

uint64_t seed_of(const Config& c) {
    return c.is_set("seed") ? static_cast<uint64_t>(c.get_int("seed")) : 0;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct LoadedModel {
    Model model;
    Tokenizer tokenizer;
    ScheduleKind schedule;  // the schedule the checkpoint was trained with
};

LoadedModel model_from_checkpoint(const std::string& path) {
    CheckpointData data = load_checkpoint(path);
    Config train_cfg = Config::from_text(data.run_config_text, path + " (embedded config)");
    LoadedModel loaded{Model(data.model_config), Tokenizer::from_text(data.vocab_text),
                       train_cfg.schedule()};
    if (data.params.size() != loaded.model.parameters().size()) {
        throw DataError("checkpoint " + path + ": parameter count mismatch");
    }
    loaded.model.parameters() = data.params;
    return loaded;
}

int cmd_tokenizer_train(const Config& c) {
    require(c, "corpus_path", "tokenizer-train");
    require(c, "vocab_path", "tokenizer-train");
    echo_config(c);
    std::vector<std::string> lines = read_lines(c.get_string("corpus_path"));
    Tokenizer tok = Tokenizer::train(lines, static_cast<int>(c.get_int("tokenizer.vocab_size")));
    tok.save(c.get_string("vocab_path"));
    std::cout << "vocab_size " << tok.vocab_size() << " merges " << tok.merges().size() << "\n";
    return 0;
}

int cmd_freq_table(const Config& c) {
    require(c, "corpus_path", "freq-table");
    require(c, "vocab_path", "freq-table");
    require(c, "freq_table_path", "freq-table");
    echo_config(c);
    Tokenizer tok = Tokenizer::load(c.get_string("vocab_path"));
    std::vector<int> stream;
    for (const std::string& line : read_lines(c.get_string("corpus_path"))) {
        std::vector<int> ids = tok.encode(line);
        stream.insert(stream.end(), ids.begin(), ids.end());
    }
    FrequencyTable freq = FrequencyTable::build(stream);
    freq.save(c.get_string("freq_table_path"));
    std::cout << "tokens " << stream.size() << " distinct " << freq.distinct_tokens() << "\n";
    return 0;
}

TrainOptions train_options(const Config& c, const std::string& resolved,
                           const std::string& vocab_text) {
    TrainOptions o;
    o.schedule = c.schedule();
    o.p_max = c.get_double("masking.p_max");
    o.derivative_power = c.get_double("objective.derivative_power");
    o.p_zero_mode = c.p_zero_mode();
    o.epochs = static_cast<int>(c.get_int("train.epochs"));
    o.batch_size = static_cast<int>(c.get_int("train.batch_size"));
    o.seq_len = static_cast<int>(c.get_int("train.seq_len"));
    o.peak_lr = c.get_double("train.peak_lr");
    o.warmup_frac = c.get_double("train.warmup_frac");
    o.lr_floor_frac = c.get_double("train.lr_floor_frac");
    o.weight_decay = c.get_double("train.weight_decay");
    o.grad_clip = c.get_double("train.grad_clip");
    o.adam_beta1 = c.get_double("train.adam_beta1");
    o.adam_beta2 = c.get_double("train.adam_beta2");
    o.adam_eps = c.get_double("train.adam_eps");
    o.seed = seed_of(c);
    o.log_every = static_cast<int>(c.get_int("train.log_every"));
    o.checkpoint_every = static_cast<int>(c.get_int("train.checkpoint_every"));
    o.eval_every = static_cast<int>(c.get_int("train.eval_every"));
    o.output_dir = c.get_string("output_dir");
    o.run_config_text = resolved;
    o.vocab_text = vocab_text;
    return o;
}

int cmd_train(const Config& c) {
    require(c, "corpus_path", "train");
    require(c, "vocab_path", "train");
    require(c, "freq_table_path", "train");
    const std::string resolved = echo_config(c);

    Tokenizer tok = Tokenizer::load(c.get_string("vocab_path"));
    FrequencyTable freq = FrequencyTable::load(c.get_string("freq_table_path"));
    Model model(c.model_config(tok.vocab_size()));

    std::vector<std::vector<int>> docs;
    for (const std::string& line : read_lines(c.get_string("corpus_path"))) {
        std::vector<int> ids = tok.encode(line);
        if (!ids.empty()) {
            docs.push_back(std::move(ids));
        }
    }
    std::vector<Segment> segments = segment_corpus(docs, static_cast<int>(c.get_int("train.seq_len")));

    TrainOptions opts = train_options(c, resolved, tok.to_text());
    Rng init_rng = derive_stream(opts.seed ^ kInitStreamSalt, 0);
    model.init_parameters(init_rng);

    Trainer trainer(model, freq, opts);
    if (c.is_set("resume_from")) {
        trainer.load_state(load_checkpoint(c.get_string("resume_from")));
        std::cout << "resumed at step " << trainer.next_step() << "\n";
    }

    std::function<void(uint64_t)> hook;
    std::ofstream eval_log;
    if (opts.eval_every > 0 && c.is_set("pairs_path")) {
        std::vector<MinimalPair> pairs = load_pairs(c.get_string("pairs_path"));
        eval_log.open(opts.output_dir + "/eval_log.csv",
                      trainer.next_step() > 0 ? std::ios::app : std::ios::out);
        if (trainer.next_step() == 0) {
            eval_log << "step,pair_accuracy\n";
        }
        Conditioning cond = conditioning_from_name(c.get_string("eval.conditioning"));
        double tau = c.get_double("eval.tau");
        hook = [&, cond, tau, pairs](uint64_t step) {
            PairEvalResult r =
                minimal_pair_accuracy(model, tok, pairs, opts.schedule, cond, tau, nullptr);
            eval_log << step << ',' << fmt(r.accuracy) << '\n' << std::flush;
        };
    }

    trainer.run(segments, hook);
    const StepStats& last = trainer.history().back();
    std::cout << "trained " << trainer.next_step() << " steps, final weighted loss "
              << fmt(last.weighted_loss) << "\n";
    return 0;
}

int cmd_eval_pll(const Config& c) {
    require(c, "checkpoint_path", "eval-pll");
    require(c, "eval.sentences_path", "eval-pll");
    echo_config(c);
    LoadedModel lm = model_from_checkpoint(c.get_string("checkpoint_path"));
    Conditioning cond = conditioning_from_name(c.get_string("eval.conditioning"));
    const double tau = c.get_double("eval.tau");

    const std::string out_path = c.get_string("output_dir") + "/pll.csv";
    std::ofstream out(out_path);
    if (!out) {
        throw DataError("cannot write " + out_path);
    }
    out << "sentence,pll,contains_unk\n";
    double sum = 0.0;
    int n = 0;
    for (const std::string& line : read_lines(c.get_string("eval.sentences_path"))) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        PllResult r = score_sentence(lm.model, lm.tokenizer, line, lm.schedule, cond, tau);
        out << n << ',' << fmt(r.pll) << ',' << (r.contains_unk ? 1 : 0) << '\n';
        sum += r.pll;
        ++n;
    }
    if (n == 0) {
        throw DataError("eval-pll: no sentences in " + c.get_string("eval.sentences_path"));
    }
    std::cout << "mean_pll " << fmt(sum / n) << " sentences " << n << "\n";
    return 0;
}

int cmd_eval_pairs(const Config& c) {
    require(c, "checkpoint_path", "eval-pairs");
    require(c, "pairs_path", "eval-pairs");
    echo_config(c);
    LoadedModel lm = model_from_checkpoint(c.get_string("checkpoint_path"));
    Conditioning cond = conditioning_from_name(c.get_string("eval.conditioning"));
    std::vector<MinimalPair> pairs = load_pairs(c.get_string("pairs_path"));

    const std::string out_path = c.get_string("output_dir") + "/pairs_report.csv";
    std::ofstream out(out_path);
    if (!out) {
        throw DataError("cannot write " + out_path);
    }
    PairEvalResult r = minimal_pair_accuracy(lm.model, lm.tokenizer, pairs, lm.schedule, cond,
                                             c.get_double("eval.tau"), &out);
    int unk = 0;
    for (const PairScore& s : r.scores) {
        unk += s.contains_unk ? 1 : 0;
    }
    std::cout << "pair_accuracy " << fmt(r.accuracy) << " pairs " << pairs.size() << " with_unk "
              << unk << "\n";
    return 0;
}

int cmd_schedule_stats(const Config& c) {
    echo_config(c);
    ScheduleKind kind = c.schedule();
    const double tau = c.get_double("stats.tau");
    const int points = static_cast<int>(c.get_int("stats.points"));
    const int samples = static_cast<int>(c.get_int("stats.samples"));
    if (points < 1) {
        throw ConfigError("config: stats.points must be >= 1");
    }

    const std::string out_path = c.get_string("output_dir") + "/schedule_stats.csv";
    std::ofstream out(out_path);
    if (!out) {
        throw DataError("cannot write " + out_path);
    }
    out << "t,masking_rate,alpha_prime_magnitude\n";
    for (int i = 1; i <= points; ++i) {
        double t = static_cast<double>(i) / (points + 1);
        out << fmt(t) << ',' << fmt(masking_rate(kind, t, tau)) << ','
            << fmt(alpha_prime_magnitude(kind, t, tau)) << '\n';
    }
    RateEstimate est = expected_masking_rate(kind, tau, samples);
    std::cout << "schedule " << schedule_name(kind.type) << " mean " << fmt(est.mean)
              << " stderr " << fmt(est.std_error) << " samples " << est.n_samples << "\n";
    return 0;
}

int cmd_mask_preview(const Config& c) {
    require(c, "vocab_path", "mask-preview");
    require(c, "freq_table_path", "mask-preview");
    require(c, "preview.text", "mask-preview");
    echo_config(c);
    Tokenizer tok = Tokenizer::load(c.get_string("vocab_path"));
    FrequencyTable freq = FrequencyTable::load(c.get_string("freq_table_path"));

    std::vector<int> ids = tok.encode(c.get_string("preview.text"));
    if (ids.empty()) {
        throw DataError("mask-preview: text tokenizes to nothing");
    }
    std::vector<bool> maskable(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        maskable[i] = !is_special_token(ids[i]);
    }
    MaskPlan plan = sequence_mask_probs(freq, ids, maskable, c.get_double("preview.power"),
                                        c.get_double("preview.target_rate"));
    Rng rng = derive_stream(seed_of(c), 0);
    CorruptedSequence cor = apply_mask(plan, ids, rng, kMaskId);

    std::cout << "pos\ttoken\tid\tweight\tprob\tmasked\n";
    for (size_t i = 0; i < ids.size(); ++i) {
        std::cout << i << '\t' << tok.token_for(ids[i]) << '\t' << ids[i] << '\t'
                  << fmt(freq.weight_for(ids[i])) << '\t' << fmt(plan.probs[i]) << '\t'
                  << (cor.mask_indicator[i] ? 1 : 0) << '\n';
    }
    std::cout << "masked " << cor.masked_count() << " of " << ids.size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mdlab: a desk-scale masked diffusion language modeling laboratory"};
    app.require_subcommand(1);
    app.footer("Config keys (set in --config file or via --set key=value):\n" +
               config_help_text());

    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const Config&);
    };
    const Sub subs[] = {
        {"tokenizer-train", "learn a BPE vocabulary from corpus_path", cmd_tokenizer_train},
        {"freq-table", "count token frequencies over the encoded corpus", cmd_freq_table},
        {"train", "train a masked diffusion model", cmd_train},
        {"eval-pll", "pseudo-log-likelihood of sentences under a checkpoint", cmd_eval_pll},
        {"eval-pairs", "minimal-pair accuracy under a checkpoint", cmd_eval_pairs},
        {"schedule-stats", "tabulate a noise schedule and its Monte-Carlo mean",
         cmd_schedule_stats},
        {"mask-preview", "show per-token masking probabilities for a text", cmd_mask_preview},
    };

    CommonArgs args;
    int (*selected)(const Config&) = nullptr;
    for (const Sub& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, args);
        sub->callback([&selected, &s] { selected = s.run; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        return selected(resolve(args));
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
