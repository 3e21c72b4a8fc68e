#pragma once

#include <cmath>
#include <stdexcept>

namespace mdlab {

inline double normal_pdf(double x, double mean, double stddev) {
    double z = (x - mean) / stddev;
    return std::exp(-0.5 * z * z) / (stddev * 2.5066282746310005024);
}

inline double normal_cdf(double x, double mean, double stddev) {
    double z = (x - mean) / stddev;
    return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

// Standard normal quantile: Acklam's rational approximation polished with
// Newton steps against the erfc-based CDF. Accurate to ~1 ulp over (0,1).
inline double standard_normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw std::domain_error("standard_normal_quantile: u must be in (0,1)");
    }
    if (u == 0.5) {
        return 0.0;
    }
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double q, r, x;
    if (u < p_low) {
        q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - p_low) {
        q = u - 0.5;
        r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        q = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int i = 0; i < 3; ++i) {
        double err = normal_cdf(x, 0.0, 1.0) - u;
        double pdf = normal_pdf(x, 0.0, 1.0);
        if (pdf <= 0.0) {
            break;
        }
        x -= err / pdf;
    }
    return x;
}

inline double normal_quantile(double u, double mean, double stddev) {
    return mean + stddev * standard_normal_quantile(u);
}

}  // namespace mdlab
