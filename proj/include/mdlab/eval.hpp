#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mdlab/model.hpp"
#include "mdlab/schedules.hpp"
#include "mdlab/tokenizer.hpp"

namespace mdlab {

// How the time input is chosen when scoring a sentence: a fixed constant, or
// the time whose masking rate equals one token out of L.
enum class Conditioning { None, SingleToken };

Conditioning conditioning_from_name(const std::string& name);
std::string conditioning_name(Conditioning cond);

struct MinimalPair {
    std::string good;
    std::string bad;
};

struct PllResult {
    double pll = 0.0;
    bool contains_unk = false;
};

// Time input for a sentence of the given length under this conditioning mode.
double conditioning_time(Conditioning cond, const ScheduleKind& schedule, int length,
                         double tau);

// Sum over positions of log p(token | sentence with only that position
// masked). One forward pass per position.
PllResult pseudo_log_likelihood(const Model& model, const std::vector<int>& tokens,
                                const ScheduleKind& schedule, Conditioning cond, double tau);

// Same result bit for bit; positions are scored in parallel and the per
// position terms summed in index order.
PllResult pseudo_log_likelihood_batched(const Model& model, const std::vector<int>& tokens,
                                        const ScheduleKind& schedule, Conditioning cond,
                                        double tau);

PllResult score_sentence(const Model& model, const Tokenizer& tok, const std::string& sentence,
                         const ScheduleKind& schedule, Conditioning cond, double tau);

std::vector<MinimalPair> load_pairs(const std::string& path);

struct PairScore {
    double pll_good = 0.0;
    double pll_bad = 0.0;
    double credit = 0.0;  // 1 good wins, 0.5 tie, 0 bad wins
    bool contains_unk = false;
};

struct PairEvalResult {
    double accuracy = 0.0;
    std::vector<PairScore> scores;
};

// Scores every pair; exact PLL ties earn half credit. If report is non-null,
// writes one CSV row per pair with both PLLs and the margin.
PairEvalResult minimal_pair_accuracy(const Model& model, const Tokenizer& tok,
                                     const std::vector<MinimalPair>& pairs,
                                     const ScheduleKind& schedule, Conditioning cond, double tau,
                                     std::ostream* report = nullptr);

}  // namespace mdlab
