#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdlab/rng.hpp"

namespace mdlab {

// Endpoint guard keeping rank-derived weights inside the open interval (0,1).
inline constexpr double kWeightEpsilon = 1e-4;

// Global token frequencies and the rank-derived base weights: tokens are
// ranked by count (rarest = highest rank, ties by ascending id) and the
// ranks min-max normalized to [kWeightEpsilon, 1-kWeightEpsilon], so rarer
// tokens carry larger weights. Immutable after build.
class FrequencyTable {
  public:
    // Counts non-special ids in the stream. Throws DataError if fewer than
    // two distinct maskable ids are seen.
    static FrequencyTable build(const std::vector<int>& token_stream);

    // One "token_id<TAB>count" per line, sorted by id.
    static FrequencyTable load(const std::string& path);
    void save(const std::string& path) const;

    // Tokens unseen in the corpus count as rarest: weight 1-kWeightEpsilon.
    double weight_for(int token_id) const;

    int64_t count_for(int token_id) const;
    size_t distinct_tokens() const { return counts_.size(); }
    const std::map<int, int64_t>& counts() const { return counts_; }

  private:
    FrequencyTable() = default;
    void compute_weights();

    std::map<int, int64_t> counts_;
    std::map<int, double> base_weight_;
};

// Per-position masking probabilities for one sequence at a target rate.
struct MaskPlan {
    std::vector<double> probs;    // 0 at non-maskable positions
    std::vector<bool> maskable;
    double target_rate = 0.0;
    double power = 0.0;
};

struct CorruptedSequence {
    std::vector<int> tokens;          // MASK substituted in place
    std::vector<bool> mask_indicator;
    std::vector<int> original;

    int masked_count() const;
};

// Linear ramp of the softening power over training: tau * p_max.
double curriculum_power(double tau, double p_max);

// Conditional scaling: s = w^p over maskable positions, mu = mean(s).
// mu > target: probs = s * target/mu. Otherwise probs = 1 - (1-s)*(1-target)/(1-mu).
// Both branches keep the maskable-position mean exactly at target_rate.
MaskPlan mask_probs_from_weights(const std::vector<double>& weights,
                                 const std::vector<bool>& maskable, double p,
                                 double target_rate);

// Same, with weights looked up in the frequency table.
MaskPlan sequence_mask_probs(const FrequencyTable& table, const std::vector<int>& tokens,
                             const std::vector<bool>& maskable, double p, double target_rate);

// Absorbing-state corruption: each position independently replaced by
// mask_id with probability probs[i]. No random/keep mixture.
CorruptedSequence apply_mask(const MaskPlan& plan, const std::vector<int>& original, Rng& rng,
                             int mask_id);

}  // namespace mdlab
