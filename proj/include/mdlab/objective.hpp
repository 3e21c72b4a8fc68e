#pragma once

#include <vector>

#include "mdlab/schedules.hpp"

namespace mdlab {

// What the per-sequence weight becomes when the softening power is zero:
// keep the 1/(1-alpha_t) rate factor (default) or drop weighting entirely.
enum class PZeroMode { KeepRateFactor, Unweighted };

struct LossBreakdown {
    double weighted_loss = 0.0;     // weight * raw_masked_ce_sum / sequence_length
    double raw_masked_ce_sum = 0.0; // nats, summed over masked positions
    int masked_count = 0;
    double weight = 0.0;
    double t = 0.0;
};

// |alpha'_t|^p / (1 - alpha_t). p = 1 is the full ELBO factor; p = 0 keeps
// 1/(1-alpha_t) under KeepRateFactor and returns 1 under Unweighted.
double nelbo_weight(const ScheduleKind& kind, double t, double tau, double p,
                    PZeroMode mode = PZeroMode::KeepRateFactor);

// log softmax(logits)[index] for one row; throws NumericError on NaN.
double log_softmax_value(const double* logits_row, int vocab_size, int index);

struct MaskedCE {
    double nats_sum = 0.0;
    int count = 0;
};

// Sum of -log softmax(logits[l])[original[l]] over masked positions.
// logits is row-major [seq_len, vocab_size]. Unmasked positions contribute 0.
MaskedCE masked_cross_entropy(const double* logits, int seq_len, int vocab_size,
                              const std::vector<int>& original,
                              const std::vector<bool>& mask_indicator);

LossBreakdown make_loss_breakdown(double weight, double raw_ce_sum, int masked_count,
                                  int sequence_length, double t);

// Batch mean of weighted per-sequence losses, the single-sample estimate of
// the continuous-time objective.
double nelbo_loss(const std::vector<LossBreakdown>& batch);

// d(ce_sum)/d(logits_row) for one masked position: softmax(row) - onehot(target).
void masked_ce_logit_grad(const double* logits_row, int vocab_size, int target, double* grad_row);

}  // namespace mdlab
