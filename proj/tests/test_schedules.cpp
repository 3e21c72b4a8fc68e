#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "mdlab/rng.hpp"
#include "mdlab/schedules.hpp"

using namespace mdlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<ScheduleKind> all_kinds() {
    return {ScheduleKind::linear(), ScheduleKind::cosine(),
            ScheduleKind::simple_gaussian(0.3, 0.1),
            ScheduleKind::bimodal_gaussian(0.6, 0.12, 0.02, 0.4, 0.85, 0.08)};
}

double normal_pdf(double x, double mu, double sigma) {
    double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * kPi));
}

}  // namespace

TEST_SUITE("schedules") {

TEST_CASE("closed-form rates at reference points") {
    CHECK(masking_rate(ScheduleKind::linear(), 0.5, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
    // cosine at t near 1: 1 - cos(0) -> 0, held at the clamp floor
    ScheduleKind cos_kind = ScheduleKind::cosine();
    CHECK(masking_rate(cos_kind, 1.0 - 1e-12, 0.0) == doctest::Approx(cos_kind.clamp_epsilon));
    // median of a symmetric distribution is its mean
    CHECK(masking_rate(ScheduleKind::simple_gaussian(0.3, 0.1), 0.5, 0.0) ==
          doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("derivative magnitudes at reference points") {
    for (double t : {0.1, 0.25, 0.5, 0.9}) {
        CHECK(alpha_prime_magnitude(ScheduleKind::linear(), t, 0.0) == 1.0);
    }
    CHECK(alpha_prime_magnitude(ScheduleKind::cosine(), 1.0 - 1e-9, 0.0) ==
          doctest::Approx(0.0).epsilon(1e-6));
    // inverse-function rule at the median: 1/pdf(0.3) = 0.1*sqrt(2*pi)
    CHECK(alpha_prime_magnitude(ScheduleKind::simple_gaussian(0.3, 0.1), 0.5, 0.0) ==
          doctest::Approx(0.1 * std::sqrt(2.0 * kPi)).epsilon(1e-9));
}

TEST_CASE("gaussian derivative matches the empirical quantile function") {
    // oracle: sort 1e6 draws of N(0.3, 0.1), finite-difference the empirical
    // quantile around the median
    const int n = 1000000;
    Rng rng(99);
    std::vector<double> samples(n);
    for (double& s : samples) {
        s = 0.3 + 0.1 * rng.normal();
    }
    std::sort(samples.begin(), samples.end());
    const double h = 0.01;
    double hi = samples[static_cast<size_t>((0.5 + h) * n)];
    double lo = samples[static_cast<size_t>((0.5 - h) * n)];
    double empirical = (hi - lo) / (2.0 * h);
    double analytic = alpha_prime_magnitude(ScheduleKind::simple_gaussian(0.3, 0.1), 0.5, 0.0);
    CHECK(std::abs(analytic - empirical) / empirical < 0.05);
}

TEST_CASE("bimodal quantile agrees with the empirical mixture distribution") {
    ScheduleKind kind = ScheduleKind::bimodal_gaussian(0.6, 0.12, 0.02, 0.4, 0.85, 0.08);
    const double tau = 0.5;
    const int n = 1000000;
    Rng rng(7);
    std::vector<double> samples(n);
    const double mu2 = bimodal_mu2(kind, tau);
    for (double& s : samples) {
        bool left = rng.uniform() < kind.w1;
        s = left ? kind.mu1 + kind.sigma1 * rng.normal() : mu2 + kind.sigma2 * rng.normal();
    }
    std::sort(samples.begin(), samples.end());
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        double q = masking_rate(kind, t, tau);
        auto it = std::lower_bound(samples.begin(), samples.end(), q);
        double empirical_cdf = static_cast<double>(it - samples.begin()) / n;
        CHECK(std::abs(empirical_cdf - t) < 3e-3);
    }
}

TEST_CASE("rates are monotone in t") {
    // cosine runs toward clean at t=1, every other kind toward fully masked
    for (const ScheduleKind& kind : all_kinds()) {
        bool decreasing = kind.type == ScheduleType::Cosine;
        for (double tau : {0.0, 0.5, 1.0}) {
            double prev = masking_rate(kind, 1 / 1000.0, tau);
            for (int i = 2; i <= 999; ++i) {
                double t = i / 1000.0;
                double rate = masking_rate(kind, t, tau);
                if (decreasing) {
                    CHECK(rate <= prev);
                } else {
                    CHECK(rate >= prev);
                }
                prev = rate;
            }
        }
    }
}

TEST_CASE("rates stay inside the clamp band") {
    Rng rng(31);
    for (const ScheduleKind& kind : all_kinds()) {
        for (int i = 0; i < 2000; ++i) {
            double t = rng.uniform();
            double rate = masking_rate(kind, t, 0.5);
            CHECK(rate >= kind.clamp_epsilon);
            CHECK(rate <= 1.0 - kind.clamp_epsilon);
        }
    }
}

TEST_CASE("finite difference of the rate matches the derivative magnitude") {
    const double h = 1e-4;
    for (const ScheduleKind& kind : all_kinds()) {
        for (double tau : {0.0, 0.5, 1.0}) {
            for (int i = 1; i <= 101; ++i) {
                double t = static_cast<double>(i) / 102.0;
                double fd = std::abs(
                    (masking_rate(kind, t + h, tau) - masking_rate(kind, t - h, tau)) / (2 * h));
                double analytic = alpha_prime_magnitude(kind, t, tau);
                CHECK(std::abs(fd - analytic) <= 0.05 * std::abs(analytic) + 1e-12);
            }
        }
    }
}

TEST_CASE("bimodal right mode drifts with training progress") {
    ScheduleKind kind = ScheduleKind::bimodal_gaussian(0.6, 0.12, 0.02, 0.4, 0.85, 0.08);
    CHECK(bimodal_mu2(kind, 0.0) == 0.4);
    CHECK(bimodal_mu2(kind, 1.0) ==
          doctest::Approx(0.4 + 0.45 * (1.0 - std::exp(-1.0))).epsilon(1e-12));
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        double mu2 = bimodal_mu2(kind, i / 100.0);
        CHECK(mu2 > prev);
        CHECK(mu2 < kind.mu2_hi);
        prev = mu2;
    }
}

TEST_CASE("sampling is deterministic given the stream") {
    ScheduleKind kind = ScheduleKind::cosine();
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        TimeSample sa = sample_time(kind, a, 0.3);
        TimeSample sb = sample_time(kind, b, 0.3);
        CHECK(sa.t == sb.t);
        CHECK(sa.masking_rate == sb.masking_rate);
        CHECK(sa.t > 0.0);
        CHECK(sa.t < 1.0);
    }
}

TEST_CASE("monte carlo means match the analytic expectations") {
    RateEstimate cosine = expected_masking_rate(ScheduleKind::cosine(), 0.0, 100000);
    CHECK(std::abs(cosine.mean - (1.0 - 2.0 / kPi)) < 0.005);
    RateEstimate linear = expected_masking_rate(ScheduleKind::linear(), 0.0, 100000);
    CHECK(std::abs(linear.mean - 0.5) < 0.005);
    RateEstimate gauss =
        expected_masking_rate(ScheduleKind::simple_gaussian(0.3, 0.1), 0.0, 100000);
    CHECK(std::abs(gauss.mean - 0.3) < 0.005);
    CHECK(cosine.std_error > 0.0);
    CHECK(cosine.std_error < 0.005);
    CHECK(expected_masking_rate(ScheduleKind::cosine(), 0.0, 100000).mean == cosine.mean);
}

TEST_CASE("time_for_rate inverts masking_rate") {
    Rng rng(77);
    for (const ScheduleKind& kind : all_kinds()) {
        for (int i = 0; i < 200; ++i) {
            double t = 0.01 + 0.98 * rng.uniform();
            double rate = masking_rate(kind, t, 0.5);
            if (rate <= kind.clamp_epsilon || rate >= 1.0 - kind.clamp_epsilon) {
                continue;  // clamped rates are not invertible
            }
            double back = time_for_rate(kind, rate, 0.5);
            CHECK(std::abs(back - t) < 1e-7);
        }
    }
}

TEST_CASE("mixture quantile satisfies its own CDF to bisection tolerance") {
    ScheduleKind kind = ScheduleKind::bimodal_gaussian(0.6, 0.12, 0.02, 0.4, 0.85, 0.08);
    for (double t : {0.01, 0.2, 0.4, 0.6, 0.8, 0.99}) {
        double q = masking_rate(kind, t, 1.0);
        // CDF evaluated via the two mode CDFs
        double mu2 = bimodal_mu2(kind, 1.0);
        auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
        double cdf = kind.w1 * phi((q - kind.mu1) / kind.sigma1) +
                     (1.0 - kind.w1) * phi((q - mu2) / kind.sigma2);
        CHECK(std::abs(cdf - t) < 1e-8);
    }
}

TEST_CASE("derivative equals one over the mixture density") {
    ScheduleKind kind = ScheduleKind::bimodal_gaussian(0.6, 0.12, 0.02, 0.4, 0.85, 0.08);
    for (double t : {0.1, 0.35, 0.65, 0.9}) {
        double q = masking_rate(kind, t, 0.25);
        double mu2 = bimodal_mu2(kind, 0.25);
        double pdf = kind.w1 * normal_pdf(q, kind.mu1, kind.sigma1) +
                     (1.0 - kind.w1) * normal_pdf(q, mu2, kind.sigma2);
        CHECK(alpha_prime_magnitude(kind, t, 0.25) == doctest::Approx(1.0 / pdf).epsilon(1e-7));
    }
}

TEST_CASE("domain errors") {
    ScheduleKind kind = ScheduleKind::cosine();
    CHECK_THROWS_AS(masking_rate(kind, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(masking_rate(kind, 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(masking_rate(kind, -0.5, 0.0), std::domain_error);
    CHECK_THROWS_AS(masking_rate(kind, 0.5, -0.1), std::domain_error);
    CHECK_THROWS_AS(masking_rate(kind, 0.5, 1.1), std::domain_error);
    CHECK_THROWS_AS(alpha_prime_magnitude(kind, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(expected_masking_rate(kind, 0.0, 9999), std::domain_error);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(ScheduleKind::simple_gaussian(0.3, 0.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(ScheduleKind::simple_gaussian(0.3, -1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(ScheduleKind::bimodal_gaussian(0.0, 0.12, 0.02, 0.4, 0.85, 0.08).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(ScheduleKind::bimodal_gaussian(1.0, 0.12, 0.02, 0.4, 0.85, 0.08).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(ScheduleKind::bimodal_gaussian(0.6, 0.12, 0.02, 0.85, 0.4, 0.08).validate(),
                    std::invalid_argument);
    ScheduleKind bad_eps = ScheduleKind::cosine();
    bad_eps.clamp_epsilon = 0.0;
    CHECK_THROWS_AS(bad_eps.validate(), std::invalid_argument);
    bad_eps.clamp_epsilon = 0.02;
    CHECK_THROWS_AS(bad_eps.validate(), std::invalid_argument);
    for (const ScheduleKind& kind : all_kinds()) {
        CHECK_NOTHROW(kind.validate());
    }
}

}  // TEST_SUITE
