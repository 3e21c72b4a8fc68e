#include "mdlab/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "mdlab/errors.hpp"

namespace mdlab {

double nelbo_weight(const ScheduleKind& kind, double t, double tau, double p, PZeroMode mode) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::domain_error("nelbo_weight: softening power must be in [0,1]");
    }
    if (p == 0.0 && mode == PZeroMode::Unweighted) {
        return 1.0;
    }
    double rate = masking_rate(kind, t, tau);  // rejects t at the endpoints
    if (p == 0.0) {
        return 1.0 / rate;
    }
    return std::pow(alpha_prime_magnitude(kind, t, tau), p) / rate;
}

double log_softmax_value(const double* logits_row, int vocab_size, int index) {
    if (index < 0 || index >= vocab_size) {
        throw std::invalid_argument("log_softmax_value: index out of range");
    }
    double max = logits_row[0];
    for (int v = 0; v < vocab_size; ++v) {
        if (std::isnan(logits_row[v])) {
            throw NumericError("log_softmax_value: NaN logit");
        }
        if (logits_row[v] > max) {
            max = logits_row[v];
        }
    }
    double sum = 0.0;
    for (int v = 0; v < vocab_size; ++v) {
        sum += std::exp(logits_row[v] - max);
    }
    return logits_row[index] - max - std::log(sum);
}

MaskedCE masked_cross_entropy(const double* logits, int seq_len, int vocab_size,
                              const std::vector<int>& original,
                              const std::vector<bool>& mask_indicator) {
    if (original.size() != static_cast<size_t>(seq_len) ||
        mask_indicator.size() != static_cast<size_t>(seq_len)) {
        throw std::invalid_argument("masked_cross_entropy: shape mismatch");
    }
    MaskedCE out;
    for (int l = 0; l < seq_len; ++l) {
        if (!mask_indicator[l]) {
            continue;
        }
        out.nats_sum -= log_softmax_value(logits + static_cast<size_t>(l) * vocab_size,
                                          vocab_size, original[l]);
        ++out.count;
    }
    return out;
}

LossBreakdown make_loss_breakdown(double weight, double raw_ce_sum, int masked_count,
                                  int sequence_length, double t) {
    if (sequence_length <= 0) {
        throw std::invalid_argument("make_loss_breakdown: sequence_length must be positive");
    }
    LossBreakdown b;
    b.weight = weight;
    b.raw_masked_ce_sum = raw_ce_sum;
    b.masked_count = masked_count;
    b.t = t;
    b.weighted_loss = weight * raw_ce_sum / static_cast<double>(sequence_length);
    return b;
}

double nelbo_loss(const std::vector<LossBreakdown>& batch) {
    if (batch.empty()) {
        throw std::invalid_argument("nelbo_loss: empty batch");
    }
    double sum = 0.0;
    for (const LossBreakdown& b : batch) {
        sum += b.weighted_loss;
    }
    return sum / static_cast<double>(batch.size());
}

void masked_ce_logit_grad(const double* logits_row, int vocab_size, int target, double* grad_row) {
    if (target < 0 || target >= vocab_size) {
        throw std::invalid_argument("masked_ce_logit_grad: target out of range");
    }
    double max = logits_row[0];
    for (int v = 0; v < vocab_size; ++v) {
        if (std::isnan(logits_row[v])) {
            throw NumericError("masked_ce_logit_grad: NaN logit");
        }
        if (logits_row[v] > max) {
            max = logits_row[v];
        }
    }
    double sum = 0.0;
    for (int v = 0; v < vocab_size; ++v) {
        grad_row[v] = std::exp(logits_row[v] - max);
        sum += grad_row[v];
    }
    double inv = 1.0 / sum;
    for (int v = 0; v < vocab_size; ++v) {
        grad_row[v] *= inv;
    }
    grad_row[target] -= 1.0;
}

}  // namespace mdlab
