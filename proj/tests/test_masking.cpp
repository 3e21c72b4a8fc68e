#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "mdlab/errors.hpp"
#include "mdlab/masking.hpp"
#include "mdlab/special_tokens.hpp"
#include "util.hpp"

using namespace mdlab;

namespace {

std::vector<int> stream_of(std::initializer_list<std::pair<int, int>> id_counts) {
    std::vector<int> out;
    for (auto [id, n] : id_counts) {
        out.insert(out.end(), n, id);
    }
    return out;
}

}  // namespace

TEST_SUITE("masking") {

TEST_CASE("rank weights for counts 100/10/1") {
    FrequencyTable table = FrequencyTable::build(stream_of({{10, 100}, {11, 10}, {12, 1}}));
    CHECK(table.weight_for(10) == doctest::Approx(kWeightEpsilon).epsilon(1e-12));
    CHECK(table.weight_for(11) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(table.weight_for(12) == doctest::Approx(1.0 - kWeightEpsilon).epsilon(1e-12));
}

TEST_CASE("equal counts break ties by ascending id") {
    FrequencyTable table = FrequencyTable::build(stream_of({{20, 5}, {7, 5}}));
    CHECK(table.weight_for(7) == doctest::Approx(kWeightEpsilon));
    CHECK(table.weight_for(20) == doctest::Approx(1.0 - kWeightEpsilon));
}

TEST_CASE("weights do not depend on stream order") {
    std::vector<int> a = stream_of({{10, 7}, {11, 3}, {12, 5}});
    std::vector<int> b = a;
    Rng rng(5);
    rng.shuffle(b);
    FrequencyTable ta = FrequencyTable::build(a);
    FrequencyTable tb = FrequencyTable::build(b);
    for (int id : {10, 11, 12}) {
        CHECK(ta.weight_for(id) == tb.weight_for(id));
        CHECK(ta.count_for(id) == tb.count_for(id));
    }
}

TEST_CASE("special ids are not counted") {
    FrequencyTable table =
        FrequencyTable::build(stream_of({{kPadId, 50}, {kMaskId, 50}, {9, 3}, {8, 2}}));
    CHECK(table.distinct_tokens() == 2);
    CHECK(table.count_for(kPadId) == 0);
}

TEST_CASE("unseen tokens count as rarest") {
    FrequencyTable table = FrequencyTable::build(stream_of({{10, 3}, {11, 2}}));
    CHECK(table.weight_for(999) == doctest::Approx(1.0 - kWeightEpsilon));
}

TEST_CASE("degenerate tables are rejected") {
    CHECK_THROWS_AS(FrequencyTable::build(stream_of({{10, 100}})), DataError);
    CHECK_THROWS_AS(FrequencyTable::build({}), DataError);
    CHECK_THROWS_AS(FrequencyTable::build({10, -3, 11}), DataError);
}

TEST_CASE("save and load round trip") {
    auto dir = testutil::temp_dir("freq");
    FrequencyTable table = FrequencyTable::build(stream_of({{10, 7}, {11, 3}, {12, 5}}));
    table.save((dir / "freq.tsv").string());
    FrequencyTable loaded = FrequencyTable::load((dir / "freq.tsv").string());
    CHECK(loaded.distinct_tokens() == table.distinct_tokens());
    for (int id : {10, 11, 12}) {
        CHECK(loaded.count_for(id) == table.count_for(id));
        CHECK(loaded.weight_for(id) == table.weight_for(id));
    }
}

TEST_CASE("malformed frequency files name the line") {
    auto dir = testutil::temp_dir("freqbad");
    auto path = dir / "freq.tsv";
    testutil::spit(path, "10\t5\nnot a row\n");
    CHECK_THROWS_WITH_AS(FrequencyTable::load(path.string()),
                         doctest::Contains(":2"), DataError);
    testutil::spit(path, "10\t5\n10\t6\n11\t1\n");
    CHECK_THROWS_WITH_AS(FrequencyTable::load(path.string()),
                         doctest::Contains(":2"), DataError);
}

TEST_CASE("curriculum power ramps linearly") {
    CHECK(curriculum_power(0.0, 0.02) == 0.0);
    CHECK(curriculum_power(1.0, 0.02) == 0.02);
    CHECK(curriculum_power(0.5, 0.02) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK_THROWS_AS(curriculum_power(-0.1, 0.02), std::domain_error);
    CHECK_THROWS_AS(curriculum_power(1.1, 0.02), std::domain_error);
    CHECK_THROWS_AS(curriculum_power(0.5, 1.0), std::domain_error);
    CHECK_THROWS_AS(curriculum_power(0.5, -0.1), std::domain_error);
}

TEST_CASE("hand-computed conditional scaling") {
    // weights {0.2, 0.8}, p = 1, target 0.7: mu = 0.5 <= 0.7, second branch
    MaskPlan plan = mask_probs_from_weights({0.2, 0.8}, {true, true}, 1.0, 0.7);
    CHECK(plan.probs[0] == doctest::Approx(0.52).epsilon(1e-12));
    CHECK(plan.probs[1] == doctest::Approx(0.88).epsilon(1e-12));
    CHECK((plan.probs[0] + plan.probs[1]) / 2.0 == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("scale-down branch when the mean exceeds the target") {
    MaskPlan plan = mask_probs_from_weights({0.4, 0.8}, {true, true}, 1.0, 0.3);
    // mu = 0.6 > 0.3: probs = s * 0.5
    CHECK(plan.probs[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(plan.probs[1] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("power zero erases frequency information") {
    MaskPlan plan = mask_probs_from_weights({0.1, 0.5, 0.9}, {true, true, true}, 0.0, 0.37);
    for (double p : plan.probs) {
        CHECK(p == doctest::Approx(0.37).epsilon(1e-12));
    }
}

TEST_CASE("mean preservation and range over randomized cases") {
    Rng rng(404);
    for (int trial = 0; trial < 10000; ++trial) {
        size_t n = 2 + static_cast<size_t>(rng.uniform() * 30);
        std::vector<double> weights(n);
        std::vector<bool> maskable(n, true);
        for (double& w : weights) {
            w = kWeightEpsilon + (1.0 - 2.0 * kWeightEpsilon) * rng.uniform();
        }
        double p = rng.uniform() * 0.999;
        double target = 0.05 + 0.9 * rng.uniform();
        MaskPlan plan = mask_probs_from_weights(weights, maskable, p, target);
        double mean = 0.0;
        for (double prob : plan.probs) {
            CHECK(prob >= 0.0);
            CHECK(prob <= 1.0);
            mean += prob;
        }
        mean /= static_cast<double>(n);
        CHECK(std::abs(mean - target) < 1e-9);
    }
}

TEST_CASE("probabilities preserve the weight order") {
    Rng rng(91);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> weights(8);
        for (double& w : weights) {
            w = 0.01 + 0.98 * rng.uniform();
        }
        MaskPlan plan = mask_probs_from_weights(weights, std::vector<bool>(8, true),
                                                0.05 + 0.9 * rng.uniform(),
                                                0.1 + 0.8 * rng.uniform());
        for (size_t i = 0; i < 8; ++i) {
            for (size_t j = 0; j < 8; ++j) {
                if (weights[i] < weights[j]) {
                    CHECK(plan.probs[i] <= plan.probs[j] + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("probabilities flatten as the power vanishes") {
    std::vector<double> weights = {0.05, 0.3, 0.6, 0.95};
    MaskPlan plan = mask_probs_from_weights(weights, std::vector<bool>(4, true), 1e-4, 0.5);
    double spread = *std::max_element(plan.probs.begin(), plan.probs.end()) -
                    *std::min_element(plan.probs.begin(), plan.probs.end());
    MaskPlan sharp = mask_probs_from_weights(weights, std::vector<bool>(4, true), 0.9, 0.5);
    double sharp_spread = *std::max_element(sharp.probs.begin(), sharp.probs.end()) -
                          *std::min_element(sharp.probs.begin(), sharp.probs.end());
    CHECK(spread < 1e-3);
    CHECK(sharp_spread > 0.1);
}

TEST_CASE("non-maskable positions never get probability") {
    FrequencyTable table = FrequencyTable::build(stream_of({{10, 9}, {11, 4}, {12, 2}}));
    std::vector<int> tokens = {kClsId, 10, 11, kPadId, 12};
    std::vector<bool> maskable = {false, true, true, false, true};
    MaskPlan plan = sequence_mask_probs(table, tokens, maskable, 0.5, 0.4);
    CHECK(plan.probs[0] == 0.0);
    CHECK(plan.probs[3] == 0.0);
    double mean = (plan.probs[1] + plan.probs[2] + plan.probs[4]) / 3.0;
    CHECK(mean == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("argument validation") {
    std::vector<bool> two(2, true);
    CHECK_THROWS_AS(mask_probs_from_weights({0.5}, two, 0.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(mask_probs_from_weights({0.5, 0.5}, two, 0.5, 0.0), std::domain_error);
    CHECK_THROWS_AS(mask_probs_from_weights({0.5, 0.5}, two, 0.5, 1.0), std::domain_error);
    CHECK_THROWS_AS(mask_probs_from_weights({0.5, 0.5}, two, -0.1, 0.5), std::domain_error);
    // exponents past 1 are legal, only the curriculum cap is restricted
    CHECK_NOTHROW(mask_probs_from_weights({0.5, 0.5}, two, 2.0, 0.5));
    CHECK_THROWS_AS(mask_probs_from_weights({0.5, 0.5}, {false, false}, 0.5, 0.5),
                    std::invalid_argument);
}

TEST_CASE("apply_mask substitutes in place and keeps the rest") {
    MaskPlan plan;
    plan.probs = {0.0, 1.0, 0.5, 0.0};
    plan.maskable = {false, true, true, false};
    std::vector<int> original = {kClsId, 10, 11, 12};
    Rng rng(8);
    CorruptedSequence cor = apply_mask(plan, original, rng, kMaskId);
    CHECK(cor.original == original);
    CHECK(cor.tokens[0] == kClsId);
    CHECK(cor.tokens[1] == kMaskId);  // probability one always fires
    CHECK(cor.mask_indicator[1]);
    CHECK_FALSE(cor.mask_indicator[0]);
    CHECK_FALSE(cor.mask_indicator[3]);
    for (size_t i = 0; i < original.size(); ++i) {
        if (!cor.mask_indicator[i]) {
            CHECK(cor.tokens[i] == original[i]);
        }
    }
    CHECK(cor.masked_count() >= 1);
}

TEST_CASE("masked fraction concentrates at the target") {
    FrequencyTable table =
        FrequencyTable::build(stream_of({{10, 50}, {11, 20}, {12, 8}, {13, 2}}));
    std::vector<int> tokens;
    for (int i = 0; i < 1000; ++i) {
        tokens.push_back(10 + i % 4);
    }
    std::vector<bool> maskable(tokens.size(), true);
    MaskPlan plan = sequence_mask_probs(table, tokens, maskable, 0.3, 0.5);
    Rng rng(17);
    int64_t masked = 0;
    const int reps = 200;
    for (int rep = 0; rep < reps; ++rep) {
        masked += apply_mask(plan, tokens, rng, kMaskId).masked_count();
    }
    double fraction = static_cast<double>(masked) / (reps * tokens.size());
    CHECK(std::abs(fraction - 0.5) < 0.01);
}

TEST_CASE("sequences already containing the mask id are rejected") {
    MaskPlan plan;
    plan.probs = {0.5, 0.5};
    plan.maskable = {true, true};
    Rng rng(3);
    std::vector<int> original = {10, kMaskId};
    CHECK_THROWS_AS(apply_mask(plan, original, rng, kMaskId), DataError);
}

}  // TEST_SUITE
