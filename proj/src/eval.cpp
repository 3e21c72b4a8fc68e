#include "mdlab/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mdlab/errors.hpp"
#include "mdlab/objective.hpp"
#include "mdlab/special_tokens.hpp"

namespace mdlab {

Conditioning conditioning_from_name(const std::string& name) {
    if (name == "none") {
        return Conditioning::None;
    }
    if (name == "single_token") {
        return Conditioning::SingleToken;
    }
    throw ConfigError("unknown conditioning '" + name + "' (expected none or single_token)");
}

std::string conditioning_name(Conditioning cond) {
    return cond == Conditioning::None ? "none" : "single_token";
}

double conditioning_time(Conditioning cond, const ScheduleKind& schedule, int length,
                         double tau) {
    if (length < 1) {
        throw std::invalid_argument("conditioning_time: length must be >= 1");
    }
    if (cond == Conditioning::None) {
        return kFixedTimeInput;
    }
    double rate = 1.0 / static_cast<double>(length);
    rate = std::min(rate, 1.0 - schedule.clamp_epsilon);
    rate = std::max(rate, schedule.clamp_epsilon);
    return time_for_rate(schedule, rate, tau);
}

namespace {

void check_tokens(const Model& model, const std::vector<int>& tokens) {
    if (tokens.empty()) {
        throw DataError("pll: sentence tokenizes to zero tokens");
    }
    if (tokens.size() > static_cast<size_t>(model.config().max_seq_len)) {
        throw DataError("pll: sentence length " + std::to_string(tokens.size()) +
                        " exceeds max_seq_len " + std::to_string(model.config().max_seq_len));
    }
    for (int id : tokens) {
        if (id < 0 || id >= model.config().vocab_size) {
            throw DataError("pll: token id " + std::to_string(id) + " outside vocabulary");
        }
    }
}

bool any_unk(const std::vector<int>& tokens) {
    return std::find(tokens.begin(), tokens.end(), kUnkId) != tokens.end();
}

// log p(tokens[pos]) with only pos masked.
double position_logprob(const Model& model, const std::vector<int>& tokens, size_t pos,
                        double t, std::vector<int>& scratch_tokens,
                        std::vector<double>& scratch_logits) {
    scratch_tokens = tokens;
    scratch_tokens[pos] = kMaskId;
    model.forward(scratch_tokens, t, scratch_logits);
    const int vocab = model.config().vocab_size;
    return log_softmax_value(scratch_logits.data() + pos * static_cast<size_t>(vocab), vocab,
                             tokens[pos]);
}

}  // namespace

PllResult pseudo_log_likelihood(const Model& model, const std::vector<int>& tokens,
                                const ScheduleKind& schedule, Conditioning cond, double tau) {
    check_tokens(model, tokens);
    const double t = conditioning_time(cond, schedule, static_cast<int>(tokens.size()), tau);
    PllResult result;
    result.contains_unk = any_unk(tokens);
    std::vector<int> work;
    std::vector<double> logits;
    for (size_t pos = 0; pos < tokens.size(); ++pos) {
        result.pll += position_logprob(model, tokens, pos, t, work, logits);
    }
    return result;
}

PllResult pseudo_log_likelihood_batched(const Model& model, const std::vector<int>& tokens,
                                        const ScheduleKind& schedule, Conditioning cond,
                                        double tau) {
    check_tokens(model, tokens);
    const double t = conditioning_time(cond, schedule, static_cast<int>(tokens.size()), tau);
    const ptrdiff_t n = static_cast<ptrdiff_t>(tokens.size());
    std::vector<double> terms(tokens.size());
#pragma omp parallel
    {
        std::vector<int> work;
        std::vector<double> logits;
#pragma omp for schedule(static)
        for (ptrdiff_t pos = 0; pos < n; ++pos) {
            terms[static_cast<size_t>(pos)] =
                position_logprob(model, tokens, static_cast<size_t>(pos), t, work, logits);
        }
    }
    PllResult result;
    result.contains_unk = any_unk(tokens);
    for (double term : terms) {
        result.pll += term;  // index order, matching the serial path exactly
    }
    return result;
}

PllResult score_sentence(const Model& model, const Tokenizer& tok, const std::string& sentence,
                         const ScheduleKind& schedule, Conditioning cond, double tau) {
    return pseudo_log_likelihood_batched(model, tok.encode(sentence), schedule, cond, tau);
}

std::vector<MinimalPair> load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open pairs file " + path);
    }
    std::vector<MinimalPair> pairs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected good<TAB>bad");
        }
        if (line.find('\t', tab + 1) != std::string::npos) {
            throw DataError(path + ":" + std::to_string(lineno) + ": more than one tab");
        }
        MinimalPair pair;
        pair.good = line.substr(0, tab);
        pair.bad = line.substr(tab + 1);
        if (pair.good.empty() || pair.bad.empty()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": empty sentence");
        }
        pairs.push_back(std::move(pair));
    }
    if (pairs.empty()) {
        throw DataError(path + ": no pairs found");
    }
    return pairs;
}

PairEvalResult minimal_pair_accuracy(const Model& model, const Tokenizer& tok,
                                     const std::vector<MinimalPair>& pairs,
                                     const ScheduleKind& schedule, Conditioning cond, double tau,
                                     std::ostream* report) {
    if (pairs.empty()) {
        throw std::invalid_argument("minimal_pair_accuracy: no pairs");
    }
    if (report) {
        *report << "pair,pll_good,pll_bad,margin,credit,contains_unk\n";
    }
    PairEvalResult result;
    result.scores.reserve(pairs.size());
    double credit_sum = 0.0;
    char buf[64];
    for (size_t i = 0; i < pairs.size(); ++i) {
        PllResult good = score_sentence(model, tok, pairs[i].good, schedule, cond, tau);
        PllResult bad = score_sentence(model, tok, pairs[i].bad, schedule, cond, tau);
        PairScore score;
        score.pll_good = good.pll;
        score.pll_bad = bad.pll;
        score.contains_unk = good.contains_unk || bad.contains_unk;
        if (good.pll > bad.pll) {
            score.credit = 1.0;
        } else if (good.pll == bad.pll) {
            score.credit = 0.5;
        }
        credit_sum += score.credit;
        if (report) {
            *report << i;
            std::snprintf(buf, sizeof(buf), ",%.17g", score.pll_good);
            *report << buf;
            std::snprintf(buf, sizeof(buf), ",%.17g", score.pll_bad);
            *report << buf;
            std::snprintf(buf, sizeof(buf), ",%.17g", score.pll_good - score.pll_bad);
            *report << buf << ',' << score.credit << ',' << (score.contains_unk ? 1 : 0) << '\n';
        }
        result.scores.push_back(score);
    }
    result.accuracy = credit_sum / static_cast<double>(pairs.size());
    return result;
}

}  // namespace mdlab
