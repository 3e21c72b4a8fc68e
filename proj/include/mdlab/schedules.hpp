#pragma once

#include <string>

#include "mdlab/rng.hpp"

namespace mdlab {

enum class ScheduleType { Linear, Cosine, SimpleGaussian, BimodalGaussian };

// A noise schedule maps diffusion time t (and training progress tau) to a
// masking rate 1-alpha_t. Distributional schedules are quantile maps: with t
// uniform on (0,1), the rate Q(t) is distributed as stated, and
// |alpha'_t| = 1/pdf(Q(t)) by the inverse-function rule.
struct ScheduleKind {
    ScheduleType type = ScheduleType::Linear;

    // SimpleGaussian
    double mean = 0.3;
    double stddev = 0.1;

    // BimodalGaussian: w1*N(mu1,sigma1^2) + (1-w1)*N(mu2(tau),sigma2^2),
    // mu2(tau) = mu2_lo + (mu2_hi - mu2_lo)*(1 - exp(-tau)).
    double w1 = 0.6;
    double mu1 = 0.12;
    double sigma1 = 0.02;
    double mu2_lo = 0.4;
    double mu2_hi = 0.85;
    double sigma2 = 0.08;

    double clamp_epsilon = 1e-4;

    void validate() const;  // throws std::invalid_argument on bad parameters

    static ScheduleKind linear();
    static ScheduleKind cosine();
    static ScheduleKind simple_gaussian(double mean, double stddev);
    static ScheduleKind bimodal_gaussian(double w1, double mu1, double sigma1, double mu2_lo,
                                         double mu2_hi, double sigma2);
};

struct TimeSample {
    double t;             // diffusion time in (0,1)
    double masking_rate;  // 1 - alpha_t, clamped into [eps, 1-eps]
    double tau;           // training progress in [0,1]
};

struct RateEstimate {
    double mean;
    double std_error;
    int n_samples;
};

// Time-varying right-mode mean of the bimodal schedule.
double bimodal_mu2(const ScheduleKind& kind, double tau);

// Masking rate 1-alpha_t at diffusion time t. Linear: t. Cosine:
// 1-cos(pi/2*(1-t)). Gaussian kinds: the (mixture) quantile at t, clamped.
double masking_rate(const ScheduleKind& kind, double t, double tau);

// |d alpha_t / dt|, the NELBO weight's derivative factor.
double alpha_prime_magnitude(const ScheduleKind& kind, double t, double tau);

// Inverse of masking_rate in t; used for time-conditioned evaluation.
double time_for_rate(const ScheduleKind& kind, double rate, double tau);

TimeSample sample_time(const ScheduleKind& kind, Rng& rng, double tau);

// Monte-Carlo mean of the masking rate with a fixed internal seed.
RateEstimate expected_masking_rate(const ScheduleKind& kind, double tau, int n_samples);

std::string schedule_name(ScheduleType type);

}  // namespace mdlab
