#include "mdlab/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mdlab/normal.hpp"

namespace mdlab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfPi = 1.57079632679489661923;

void check_domain(double t, double tau) {
    if (!(t > 0.0 && t < 1.0)) {
        throw std::domain_error("schedule: t must be in (0,1)");
    }
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::domain_error("schedule: tau must be in [0,1]");
    }
}

double clamp_rate(const ScheduleKind& kind, double rate) {
    return std::clamp(rate, kind.clamp_epsilon, 1.0 - kind.clamp_epsilon);
}

double mixture_pdf(const ScheduleKind& kind, double x, double mu2) {
    return kind.w1 * normal_pdf(x, kind.mu1, kind.sigma1) +
           (1.0 - kind.w1) * normal_pdf(x, mu2, kind.sigma2);
}

double mixture_cdf(const ScheduleKind& kind, double x, double mu2) {
    return kind.w1 * normal_cdf(x, kind.mu1, kind.sigma1) +
           (1.0 - kind.w1) * normal_cdf(x, mu2, kind.sigma2);
}

// No closed form: bisection on the mixture CDF to 1e-10 absolute tolerance.
double mixture_quantile(const ScheduleKind& kind, double t, double mu2) {
    double lo = std::min(kind.mu1 - 12.0 * kind.sigma1, mu2 - 12.0 * kind.sigma2);
    double hi = std::max(kind.mu1 + 12.0 * kind.sigma1, mu2 + 12.0 * kind.sigma2);
    if (mixture_cdf(kind, lo, mu2) >= t) {
        return lo;
    }
    if (mixture_cdf(kind, hi, mu2) <= t) {
        return hi;
    }
    while (hi - lo > 1e-10) {
        double mid = 0.5 * (lo + hi);
        if (mixture_cdf(kind, mid, mu2) < t) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void ScheduleKind::validate() const {
    auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!(clamp_epsilon > 0.0 && clamp_epsilon <= 0.01)) {
        throw std::invalid_argument("schedule: clamp_epsilon must be in (0, 0.01]");
    }
    switch (type) {
        case ScheduleType::Linear:
        case ScheduleType::Cosine:
            break;
        case ScheduleType::SimpleGaussian:
            if (!std::isfinite(mean) || !finite_pos(stddev)) {
                throw std::invalid_argument("schedule: simple gaussian needs finite mean and stddev > 0");
            }
            break;
        case ScheduleType::BimodalGaussian:
            if (!finite_pos(sigma1) || !finite_pos(sigma2) || !std::isfinite(mu1)) {
                throw std::invalid_argument("schedule: bimodal gaussian sigmas must be > 0");
            }
            if (!(w1 > 0.0 && w1 < 1.0)) {
                throw std::invalid_argument("schedule: w1 must be in (0,1)");
            }
            if (!(mu2_lo < mu2_hi) || !(mu2_lo > 0.0 && mu2_lo < 1.0) || !(mu2_hi > 0.0 && mu2_hi < 1.0)) {
                throw std::invalid_argument("schedule: need 0 < mu2_lo < mu2_hi < 1");
            }
            break;
    }
}

ScheduleKind ScheduleKind::linear() {
    ScheduleKind k;
    k.type = ScheduleType::Linear;
    return k;
}

ScheduleKind ScheduleKind::cosine() {
    ScheduleKind k;
    k.type = ScheduleType::Cosine;
    return k;
}

ScheduleKind ScheduleKind::simple_gaussian(double mean, double stddev) {
    ScheduleKind k;
    k.type = ScheduleType::SimpleGaussian;
    k.mean = mean;
    k.stddev = stddev;
    k.validate();
    return k;
}

ScheduleKind ScheduleKind::bimodal_gaussian(double w1, double mu1, double sigma1, double mu2_lo,
                                            double mu2_hi, double sigma2) {
    ScheduleKind k;
    k.type = ScheduleType::BimodalGaussian;
    k.w1 = w1;
    k.mu1 = mu1;
    k.sigma1 = sigma1;
    k.mu2_lo = mu2_lo;
    k.mu2_hi = mu2_hi;
    k.sigma2 = sigma2;
    k.validate();
    return k;
}

double bimodal_mu2(const ScheduleKind& kind, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::domain_error("schedule: tau must be in [0,1]");
    }
    return kind.mu2_lo + (kind.mu2_hi - kind.mu2_lo) * (1.0 - std::exp(-tau));
}

double masking_rate(const ScheduleKind& kind, double t, double tau) {
    check_domain(t, tau);
    switch (kind.type) {
        case ScheduleType::Linear:
            return clamp_rate(kind, t);
        case ScheduleType::Cosine:
            return clamp_rate(kind, 1.0 - std::cos(kHalfPi * (1.0 - t)));
        case ScheduleType::SimpleGaussian:
            return clamp_rate(kind, normal_quantile(t, kind.mean, kind.stddev));
        case ScheduleType::BimodalGaussian:
            return clamp_rate(kind, mixture_quantile(kind, t, bimodal_mu2(kind, tau)));
    }
    throw std::logic_error("schedule: unknown type");
}

double alpha_prime_magnitude(const ScheduleKind& kind, double t, double tau) {
    check_domain(t, tau);
    switch (kind.type) {
        case ScheduleType::Linear:
            return 1.0;
        case ScheduleType::Cosine:
            return kHalfPi * std::sin(kHalfPi * (1.0 - t));
        case ScheduleType::SimpleGaussian: {
            // Inverse-function rule, with the density evaluated at the
            // clamped rate so the weight stays bounded.
            double rate = masking_rate(kind, t, tau);
            return 1.0 / normal_pdf(rate, kind.mean, kind.stddev);
        }
        case ScheduleType::BimodalGaussian: {
            double rate = masking_rate(kind, t, tau);
            return 1.0 / mixture_pdf(kind, rate, bimodal_mu2(kind, tau));
        }
    }
    throw std::logic_error("schedule: unknown type");
}

double time_for_rate(const ScheduleKind& kind, double rate, double tau) {
    if (!(rate > 0.0 && rate < 1.0)) {
        throw std::domain_error("schedule: rate must be in (0,1)");
    }
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::domain_error("schedule: tau must be in [0,1]");
    }
    double t = 0.5;
    switch (kind.type) {
        case ScheduleType::Linear:
            t = rate;
            break;
        case ScheduleType::Cosine:
            t = 1.0 - std::acos(1.0 - rate) / kHalfPi;
            break;
        case ScheduleType::SimpleGaussian:
            t = normal_cdf(rate, kind.mean, kind.stddev);
            break;
        case ScheduleType::BimodalGaussian:
            t = mixture_cdf(kind, rate, bimodal_mu2(kind, tau));
            break;
    }
    return std::clamp(t, 1e-9, 1.0 - 1e-9);
}

TimeSample sample_time(const ScheduleKind& kind, Rng& rng, double tau) {
    double t = rng.uniform();
    return TimeSample{t, masking_rate(kind, t, tau), tau};
}

RateEstimate expected_masking_rate(const ScheduleKind& kind, double tau, int n_samples) {
    if (n_samples < 10000) {
        throw std::domain_error("expected_masking_rate: need n_samples >= 10000");
    }
    Rng rng(0xC0FFEEull);  // fixed internal seed: estimates are reproducible
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        double r = sample_time(kind, rng, tau).masking_rate;
        sum += r;
        sum_sq += r * r;
    }
    double mean = sum / n_samples;
    double var = std::max(0.0, sum_sq / n_samples - mean * mean);
    return RateEstimate{mean, std::sqrt(var / n_samples), n_samples};
}

std::string schedule_name(ScheduleType type) {
    switch (type) {
        case ScheduleType::Linear:
            return "linear";
        case ScheduleType::Cosine:
            return "cosine";
        case ScheduleType::SimpleGaussian:
            return "simple_gaussian";
        case ScheduleType::BimodalGaussian:
            return "bimodal_gaussian";
    }
    return "unknown";
}

}  // namespace mdlab
