#include "mdlab/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mdlab/errors.hpp"
#include "mdlab/special_tokens.hpp"

namespace mdlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Distinct stream families so the epoch-order draws can never collide with
// the per-sequence data draws.
constexpr uint64_t kOrderStreamSalt = 0x8f1bbcdcbfa53e0bull;
constexpr uint64_t kDataStreamSalt = 0xd6e8feb86659fd93ull;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<Segment> segment_corpus(const std::vector<std::vector<int>>& docs, int seq_len) {
    if (seq_len < 1) {
        throw std::invalid_argument("segment_corpus: seq_len must be positive");
    }
    std::vector<Segment> segments;
    uint64_t next_id = 0;
    for (const auto& doc : docs) {
        for (size_t start = 0; start < doc.size(); start += static_cast<size_t>(seq_len)) {
            Segment seg;
            seg.length = static_cast<int>(std::min(doc.size() - start,
                                                   static_cast<size_t>(seq_len)));
            seg.tokens.assign(doc.begin() + static_cast<ptrdiff_t>(start),
                              doc.begin() + static_cast<ptrdiff_t>(start + seg.length));
            seg.tokens.resize(static_cast<size_t>(seq_len), kPadId);
            seg.stable_id = next_id++;
            segments.push_back(std::move(seg));
        }
    }
    if (segments.empty()) {
        throw DataError("segment_corpus: corpus produced no segments");
    }
    return segments;
}

Trainer::Trainer(Model& model, const FrequencyTable& freq, const TrainOptions& opts)
    : model_(model), freq_(freq), opts_(opts) {
    grad_.assign(model_.parameters().size(), 0.0);
    adam_m_.assign(model_.parameters().size(), 0.0);
    adam_v_.assign(model_.parameters().size(), 0.0);
    if (opts_.epochs < 1 || opts_.batch_size < 1) {
        throw ConfigError("trainer: epochs and batch_size must be positive");
    }
    if (opts_.log_every < 1) {
        throw ConfigError("trainer: log_every must be >= 1");
    }
    if (opts_.checkpoint_every < 0 || opts_.eval_every < 0) {
        throw ConfigError("trainer: cadences must be >= 0");
    }
}

uint64_t Trainer::total_steps(size_t n_segments) const {
    uint64_t per_epoch = (n_segments + opts_.batch_size - 1) / opts_.batch_size;
    return per_epoch * static_cast<uint64_t>(opts_.epochs);
}

double Trainer::tau_at(uint64_t step, uint64_t total) const {
    if (total <= 1) {
        return 0.0;
    }
    return static_cast<double>(step) / static_cast<double>(total - 1);
}

double Trainer::lr_at(uint64_t step, uint64_t total) const {
    const uint64_t warmup = static_cast<uint64_t>(std::llround(opts_.warmup_frac *
                                                                static_cast<double>(total)));
    if (warmup > 0 && step < warmup) {
        return opts_.peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    const double floor = opts_.lr_floor_frac * opts_.peak_lr;
    const uint64_t span = total > warmup ? total - warmup : 1;
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
    return floor + 0.5 * (opts_.peak_lr - floor) * (1.0 + std::cos(kPi * progress));
}

std::vector<size_t> Trainer::epoch_order(uint64_t epoch, size_t n_segments) const {
    std::vector<size_t> order(n_segments);
    for (size_t i = 0; i < n_segments; ++i) {
        order[i] = i;
    }
    Rng rng = derive_stream(opts_.seed ^ kOrderStreamSalt, epoch);
    rng.shuffle(order);
    return order;
}

StepStats Trainer::train_step(const std::vector<Segment>& segments,
                              const std::vector<size_t>& order, uint64_t step, uint64_t total,
                              uint64_t epoch, size_t pos) {
    const size_t begin = pos * static_cast<size_t>(opts_.batch_size);
    const size_t end = std::min(begin + static_cast<size_t>(opts_.batch_size), order.size());
    const size_t batch_n = end - begin;
    const double tau = tau_at(step, total);
    const double power = curriculum_power(tau, opts_.p_max);
    const double lr = lr_at(step, total);
    const int vocab = model_.config().vocab_size;

    std::fill(grad_.begin(), grad_.end(), 0.0);
    std::vector<LossBreakdown> batch;
    batch.reserve(batch_n);
    double sum_t = 0.0, sum_w = 0.0;

    ForwardCache cache;
    std::vector<double> logits, dlogits;
    for (size_t bi = begin; bi < end; ++bi) {
        const Segment& seg = segments[order[bi]];
        std::vector<int> toks(seg.tokens.begin(), seg.tokens.begin() + seg.length);
        std::vector<bool> maskable(toks.size());
        bool any_maskable = false;
        for (size_t i = 0; i < toks.size(); ++i) {
            maskable[i] = !is_special_token(toks[i]);
            any_maskable = any_maskable || maskable[i];
        }

        Rng rng = derive_stream(opts_.seed ^ kDataStreamSalt, epoch, seg.stable_id);
        const double t = rng.uniform();
        const double weight =
            nelbo_weight(opts_.schedule, t, tau, opts_.derivative_power, opts_.p_zero_mode);
        sum_t += t;
        sum_w += weight;

        if (!any_maskable) {
            batch.push_back(make_loss_breakdown(weight, 0.0, 0, seg.length, t));
            continue;
        }
        const double rate = masking_rate(opts_.schedule, t, tau);
        MaskPlan plan = sequence_mask_probs(freq_, toks, maskable, power, rate);
        CorruptedSequence cor = apply_mask(plan, toks, rng, kMaskId);

        model_.forward(cor.tokens, t, logits, &cache);
        MaskedCE ce = masked_cross_entropy(logits.data(), seg.length, vocab, toks,
                                           cor.mask_indicator);
        batch.push_back(make_loss_breakdown(weight, ce.nats_sum, ce.count, seg.length, t));
        if (ce.count == 0) {
            continue;
        }

        dlogits.assign(logits.size(), 0.0);
        const double scale = weight / (static_cast<double>(seg.length) *
                                       static_cast<double>(batch_n));
        for (int l = 0; l < seg.length; ++l) {
            if (!cor.mask_indicator[l]) {
                continue;
            }
            double* row = dlogits.data() + static_cast<size_t>(l) * vocab;
            masked_ce_logit_grad(logits.data() + static_cast<size_t>(l) * vocab, vocab,
                                 toks[l], row);
            for (int v = 0; v < vocab; ++v) {
                row[v] *= scale;
            }
        }
        model_.backward(cache, dlogits, grad_);
    }

    StepStats stats;
    stats.step = step;
    stats.epoch = epoch;
    stats.tau = tau;
    stats.power = power;
    stats.lr = lr;
    stats.mean_t = sum_t / static_cast<double>(batch_n);
    stats.mean_weight = sum_w / static_cast<double>(batch_n);
    for (const LossBreakdown& b : batch) {
        stats.masked_count += b.masked_count;
        stats.raw_ce_sum += b.raw_masked_ce_sum;
    }
    stats.weighted_loss = nelbo_loss(batch);
    if (!std::isfinite(stats.weighted_loss)) {
        dump_diagnostics(stats, batch);
        throw NumericError("trainer: non-finite loss at step " + std::to_string(step) +
                           " (diagnostics written to " + opts_.output_dir + ")");
    }
    optimizer_update(lr);
    return stats;
}

void Trainer::optimizer_update(double lr) {
    if (opts_.grad_clip > 0.0) {
        double sq = 0.0;
        for (double g : grad_) {
            sq += g * g;
        }
        double norm = std::sqrt(sq);
        if (norm > opts_.grad_clip) {
            double s = opts_.grad_clip / norm;
            for (double& g : grad_) {
                g *= s;
            }
        }
    }
    ++opt_steps_;
    const double b1 = opts_.adam_beta1, b2 = opts_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt_steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt_steps_));
    std::vector<double>& params = model_.parameters();
    for (const ParamInfo& info : model_.param_infos()) {
        const double wd = info.decay ? opts_.weight_decay : 0.0;
        for (int64_t i = info.offset; i < info.offset + info.size; ++i) {
            double g = grad_[i];
            adam_m_[i] = b1 * adam_m_[i] + (1.0 - b1) * g;
            adam_v_[i] = b2 * adam_v_[i] + (1.0 - b2) * g * g;
            double mhat = adam_m_[i] / c1;
            double vhat = adam_v_[i] / c2;
            params[i] -= lr * (mhat / (std::sqrt(vhat) + opts_.adam_eps) + wd * params[i]);
        }
    }
}

void Trainer::run(const std::vector<Segment>& segments,
                  const std::function<void(uint64_t step)>& eval_hook) {
    if (segments.empty()) {
        throw DataError("trainer: no segments to train on");
    }
    const uint64_t total = total_steps(segments.size());
    const uint64_t per_epoch = total / static_cast<uint64_t>(opts_.epochs);
    if (next_step_ >= total) {
        throw ConfigError("trainer: resume step " + std::to_string(next_step_) +
                          " is not before total " + std::to_string(total));
    }

    std::filesystem::create_directories(opts_.output_dir);
    const std::string log_path = opts_.output_dir + "/train_log.csv";
    // Resumed runs append, so finishing in the same directory reproduces the
    // straight-through log byte for byte.
    std::ofstream log(log_path, next_step_ > 0 ? std::ios::app : std::ios::out);
    if (!log) {
        throw DataError("trainer: cannot write " + log_path);
    }
    if (next_step_ == 0) {
        log << "step,epoch,tau,p,lr,t,weight,masked_count,raw_ce,weighted_loss\n";
    }

    std::vector<size_t> order;
    uint64_t order_epoch = UINT64_MAX;
    for (uint64_t step = next_step_; step < total; ++step) {
        const uint64_t epoch = step / per_epoch;
        const size_t pos = static_cast<size_t>(step % per_epoch);
        if (epoch != order_epoch) {
            order = epoch_order(epoch, segments.size());
            order_epoch = epoch;
        }
        StepStats stats = train_step(segments, order, step, total, epoch, pos);
        history_.push_back(stats);
        next_step_ = step + 1;

        if (step % static_cast<uint64_t>(opts_.log_every) == 0 || step == 0 ||
            step == total - 1) {
            log << stats.step << ',' << stats.epoch << ',' << fmt_double(stats.tau) << ','
                << fmt_double(stats.power) << ',' << fmt_double(stats.lr) << ','
                << fmt_double(stats.mean_t) << ',' << fmt_double(stats.mean_weight) << ','
                << stats.masked_count << ',' << fmt_double(stats.raw_ce_sum) << ','
                << fmt_double(stats.weighted_loss) << '\n';
        }
        if (opts_.checkpoint_every > 0 &&
            next_step_ % static_cast<uint64_t>(opts_.checkpoint_every) == 0 &&
            next_step_ < total) {
            save_checkpoint(opts_.output_dir + "/checkpoint_step" + std::to_string(next_step_) +
                                ".bin",
                            snapshot(next_step_, total));
        }
        if (eval_hook && opts_.eval_every > 0 &&
            next_step_ % static_cast<uint64_t>(opts_.eval_every) == 0) {
            eval_hook(next_step_);
        }
    }
    log.flush();
    if (!log) {
        throw DataError("trainer: write failed for " + log_path);
    }
    save_checkpoint(opts_.output_dir + "/checkpoint_final.bin", snapshot(total, total));
}

CheckpointData Trainer::snapshot(uint64_t next_step, uint64_t total) const {
    CheckpointData data;
    data.run_config_text = opts_.run_config_text;
    data.vocab_text = opts_.vocab_text;
    data.model_config = model_.config();
    data.seed = opts_.seed;
    data.next_step = next_step;
    data.total_steps = total;
    data.params = model_.parameters();
    data.adam_m = adam_m_;
    data.adam_v = adam_v_;
    return data;
}

void Trainer::load_state(const CheckpointData& data) {
    const ModelConfig& a = data.model_config;
    const ModelConfig& b = model_.config();
    if (a.layers != b.layers || a.hidden_dim != b.hidden_dim || a.heads != b.heads ||
        a.ffn_dim != b.ffn_dim || a.vocab_size != b.vocab_size ||
        a.max_seq_len != b.max_seq_len || a.timestep_dim != b.timestep_dim ||
        a.time_conditioning != b.time_conditioning) {
        throw DataError("trainer: checkpoint model shape does not match this run");
    }
    if (data.params.size() != model_.parameters().size()) {
        throw DataError("trainer: checkpoint parameter count mismatch");
    }
    if (data.seed != opts_.seed) {
        throw DataError("trainer: checkpoint seed does not match this run");
    }
    model_.parameters() = data.params;
    adam_m_ = data.adam_m;
    adam_v_ = data.adam_v;
    next_step_ = data.next_step;
    opt_steps_ = data.next_step;
}

void Trainer::dump_diagnostics(const StepStats& stats,
                               const std::vector<LossBreakdown>& batch) const {
    std::filesystem::create_directories(opts_.output_dir);
    std::ofstream out(opts_.output_dir + "/diagnostics.txt");
    out << "non-finite loss at step " << stats.step << "\n";
    out << "epoch " << stats.epoch << " tau " << fmt_double(stats.tau) << " p "
        << fmt_double(stats.power) << " lr " << fmt_double(stats.lr) << "\n";
    double gsq = 0.0;
    for (double g : grad_) {
        gsq += g * g;
    }
    double psq = 0.0;
    for (double p : model_.parameters()) {
        psq += p * p;
    }
    out << "grad_norm " << fmt_double(std::sqrt(gsq)) << " param_norm "
        << fmt_double(std::sqrt(psq)) << "\n";
    out << "seq\tt\tweight\tmasked\tce_sum\tweighted\n";
    for (size_t i = 0; i < batch.size(); ++i) {
        out << i << '\t' << fmt_double(batch[i].t) << '\t' << fmt_double(batch[i].weight) << '\t'
            << batch[i].masked_count << '\t' << fmt_double(batch[i].raw_masked_ce_sum) << '\t'
            << fmt_double(batch[i].weighted_loss) << '\n';
    }
}

}  // namespace mdlab
