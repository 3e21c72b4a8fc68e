#include "mdlab/masking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mdlab/errors.hpp"
#include "mdlab/special_tokens.hpp"

namespace mdlab {

FrequencyTable FrequencyTable::build(const std::vector<int>& token_stream) {
    FrequencyTable table;
    for (int id : token_stream) {
        if (id < 0) {
            throw DataError("frequency table: negative token id " + std::to_string(id));
        }
        if (is_special_token(id)) {
            continue;
        }
        ++table.counts_[id];
    }
    table.compute_weights();
    return table;
}

void FrequencyTable::compute_weights() {
    if (counts_.size() < 2) {
        throw DataError("frequency table: need at least 2 distinct maskable token ids, got " +
                        std::to_string(counts_.size()));
    }
    // Rank by count descending, ties by ascending id; rank 0 = most frequent.
    std::vector<std::pair<int64_t, int>> order;
    order.reserve(counts_.size());
    for (const auto& [id, count] : counts_) {
        order.emplace_back(count, id);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    const double span = 1.0 - 2.0 * kWeightEpsilon;
    const double denom = static_cast<double>(order.size() - 1);
    base_weight_.clear();
    for (size_t rank = 0; rank < order.size(); ++rank) {
        base_weight_[order[rank].second] = kWeightEpsilon + (static_cast<double>(rank) / denom) * span;
    }
}

FrequencyTable FrequencyTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("frequency table: cannot open " + path);
    }
    FrequencyTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        long long id = 0, count = 0;
        if (!(ls >> id >> count)) {
            throw DataError("frequency table: " + path + ":" + std::to_string(line_no) +
                            ": expected \"token_id<TAB>count\"");
        }
        if (id < 0 || count < 0) {
            throw DataError("frequency table: " + path + ":" + std::to_string(line_no) +
                            ": negative id or count");
        }
        if (is_special_token(static_cast<int>(id))) {
            continue;
        }
        if (!table.counts_.emplace(static_cast<int>(id), count).second) {
            throw DataError("frequency table: " + path + ":" + std::to_string(line_no) +
                            ": duplicate token id " + std::to_string(id));
        }
    }
    table.compute_weights();
    return table;
}

void FrequencyTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw DataError("frequency table: cannot write " + path);
    }
    for (const auto& [id, count] : counts_) {
        out << id << '\t' << count << '\n';
    }
    if (!out) {
        throw DataError("frequency table: write failed for " + path);
    }
}

double FrequencyTable::weight_for(int token_id) const {
    auto it = base_weight_.find(token_id);
    if (it == base_weight_.end()) {
        return 1.0 - kWeightEpsilon;
    }
    return it->second;
}

int64_t FrequencyTable::count_for(int token_id) const {
    auto it = counts_.find(token_id);
    return it == counts_.end() ? 0 : it->second;
}

int CorruptedSequence::masked_count() const {
    int n = 0;
    for (bool m : mask_indicator) {
        n += m ? 1 : 0;
    }
    return n;
}

double curriculum_power(double tau, double p_max) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::domain_error("curriculum_power: tau must be in [0,1]");
    }
    if (!(p_max >= 0.0 && p_max < 1.0)) {
        throw std::domain_error("curriculum_power: p_max must be in [0,1)");
    }
    return tau * p_max;
}

MaskPlan mask_probs_from_weights(const std::vector<double>& weights,
                                 const std::vector<bool>& maskable, double p,
                                 double target_rate) {
    if (weights.size() != maskable.size()) {
        throw std::invalid_argument("mask_probs: weights/maskable length mismatch");
    }
    if (!(target_rate > 0.0 && target_rate < 1.0)) {
        throw std::domain_error("mask_probs: target_rate must be in (0,1)");
    }
    if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::domain_error("mask_probs: power must be finite and >= 0");
    }

    const size_t n = weights.size();
    MaskPlan plan;
    plan.probs.assign(n, 0.0);
    plan.maskable = maskable;
    plan.target_rate = target_rate;
    plan.power = p;

    std::vector<double> s(n, 0.0);
    size_t n_maskable = 0;
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!maskable[i]) {
            continue;
        }
        if (!(weights[i] > 0.0 && weights[i] < 1.0)) {
            throw std::domain_error("mask_probs: weights must be in (0,1)");
        }
        s[i] = std::pow(weights[i], p);
        sum += s[i];
        ++n_maskable;
    }
    if (n_maskable == 0) {
        throw std::invalid_argument("mask_probs: no maskable positions");
    }

    const double mu = sum / static_cast<double>(n_maskable);
    if (mu > target_rate) {
        const double scale = target_rate / mu;
        for (size_t i = 0; i < n; ++i) {
            if (maskable[i]) {
                plan.probs[i] = s[i] * scale;
            }
        }
    } else if (1.0 - mu <= 0.0) {
        // All scores are 1 (p = 0): frequency information erased, mask uniformly.
        for (size_t i = 0; i < n; ++i) {
            if (maskable[i]) {
                plan.probs[i] = target_rate;
            }
        }
    } else {
        const double coeff = (1.0 - target_rate) / (1.0 - mu);
        for (size_t i = 0; i < n; ++i) {
            if (maskable[i]) {
                plan.probs[i] = 1.0 - (1.0 - s[i]) * coeff;
            }
        }
    }
    return plan;
}

MaskPlan sequence_mask_probs(const FrequencyTable& table, const std::vector<int>& tokens,
                             const std::vector<bool>& maskable, double p, double target_rate) {
    if (tokens.size() != maskable.size()) {
        throw std::invalid_argument("sequence_mask_probs: tokens/maskable length mismatch");
    }
    std::vector<double> weights(tokens.size(), 0.5);
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (maskable[i]) {
            weights[i] = table.weight_for(tokens[i]);
        }
    }
    return mask_probs_from_weights(weights, maskable, p, target_rate);
}

CorruptedSequence apply_mask(const MaskPlan& plan, const std::vector<int>& original, Rng& rng,
                             int mask_id) {
    if (plan.probs.size() != original.size()) {
        throw std::invalid_argument("apply_mask: plan/sequence length mismatch");
    }
    for (int id : original) {
        if (id == mask_id) {
            throw DataError("apply_mask: reserved mask id " + std::to_string(mask_id) +
                            " present in input sequence");
        }
    }
    CorruptedSequence out;
    out.original = original;
    out.tokens = original;
    out.mask_indicator.assign(original.size(), false);
    for (size_t i = 0; i < original.size(); ++i) {
        // uniform() is strictly inside (0,1), so prob 0 never fires and prob 1 always does.
        if (rng.uniform() < plan.probs[i]) {
            out.tokens[i] = mask_id;
            out.mask_indicator[i] = true;
        }
    }
    return out;
}

}  // namespace mdlab
