#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mdlab/checkpoint.hpp"
#include "mdlab/masking.hpp"
#include "mdlab/model.hpp"
#include "mdlab/objective.hpp"
#include "mdlab/schedules.hpp"

namespace mdlab {

// Fixed-length slice of one document, PAD-filled; documents are split, never
// packed together. stable_id keys the per-sequence RNG streams.
struct Segment {
    std::vector<int> tokens;
    int length = 0;
    uint64_t stable_id = 0;
};

std::vector<Segment> segment_corpus(const std::vector<std::vector<int>>& docs, int seq_len);

struct TrainOptions {
    ScheduleKind schedule;
    double p_max = 0.02;
    double derivative_power = 1.0;
    PZeroMode p_zero_mode = PZeroMode::KeepRateFactor;
    int epochs = 10;
    int batch_size = 16;
    int seq_len = 128;
    double peak_lr = 3e-4;
    double warmup_frac = 0.01;
    double lr_floor_frac = 0.1;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    int log_every = 1;
    int checkpoint_every = 0;
    int eval_every = 0;
    std::string output_dir;
    std::string run_config_text;  // embedded into checkpoints
    std::string vocab_text;
};

struct StepStats {
    uint64_t step = 0;
    uint64_t epoch = 0;
    double tau = 0.0;
    double power = 0.0;
    double lr = 0.0;
    double mean_t = 0.0;
    double mean_weight = 0.0;
    int masked_count = 0;
    double raw_ce_sum = 0.0;
    double weighted_loss = 0.0;
};

// Deterministic training loop. Every random draw comes from streams derived
// statelessly from (seed, epoch, segment id), so a resumed run replays the
// exact trace the uninterrupted run would have produced.
class Trainer {
  public:
    Trainer(Model& model, const FrequencyTable& freq, const TrainOptions& opts);

    uint64_t total_steps(size_t n_segments) const;
    double tau_at(uint64_t step, uint64_t total) const;
    double lr_at(uint64_t step, uint64_t total) const;
    std::vector<size_t> epoch_order(uint64_t epoch, size_t n_segments) const;

    // Runs from the current step to the end. Writes <output_dir>/train_log.csv
    // and checkpoints. eval_hook (optional) fires every eval_every steps.
    void run(const std::vector<Segment>& segments,
             const std::function<void(uint64_t step)>& eval_hook = nullptr);

    void load_state(const CheckpointData& data);           // resume
    CheckpointData snapshot(uint64_t next_step, uint64_t total) const;

    uint64_t next_step() const { return next_step_; }
    const std::vector<StepStats>& history() const { return history_; }

  private:
    StepStats train_step(const std::vector<Segment>& segments, const std::vector<size_t>& order,
                         uint64_t step, uint64_t total, uint64_t epoch, size_t pos);
    void optimizer_update(double lr);
    void dump_diagnostics(const StepStats& stats, const std::vector<LossBreakdown>& batch) const;

    Model& model_;
    const FrequencyTable& freq_;
    TrainOptions opts_;
    std::vector<double> grad_, adam_m_, adam_v_;
    uint64_t next_step_ = 0;
    uint64_t opt_steps_ = 0;  // completed optimizer updates (bias correction)
    std::vector<StepStats> history_;
};

}  // namespace mdlab
