#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sfde {

/// Standard normal CDF through erfc, accurate in both tails.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Inverse standard normal CDF: Acklam's rational approximation (abs error
/// ~1.15e-9) followed by one Halley step against normal_cdf, which brings it
/// to machine precision. Documented at
/// https://web.archive.org/web/20151110174102/http://home.online.no/~pjacklam/notes/invnorm/.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) {
            return -std::numeric_limits<double>::infinity();
        }
        if (p == 1.0) {
            return std::numeric_limits<double>::infinity();
        }
        throw std::domain_error("normal_quantile: p must lie in [0, 1]");
    }
    if (p > 0.5) {
        // work in the lower tail where Phi(x) - p is free of cancellation
        return -normal_quantile(1.0 - p);
    }
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }

    // One Halley refinement step.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

/// Regularized lower incomplete gamma P(a, x): power series for x < a + 1,
/// Lentz continued fraction for the complement otherwise.
inline double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0) {
        throw std::domain_error("regularized_gamma_p: need a > 0 and x >= 0");
    }
    if (x == 0.0) {
        return 0.0;
    }
    const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        for (int k = 1; k < 1000; ++k) {
            term *= x / (a + k);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) {
                break;
            }
        }
        return sum * std::exp(log_prefactor);
    }
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) {
            d = tiny;
        }
        c = b + an / c;
        if (std::abs(c) < tiny) {
            c = tiny;
        }
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) {
            break;
        }
    }
    return 1.0 - std::exp(log_prefactor) * h;
}

inline double chi_square_cdf(double x, int df) {
    if (df < 1) {
        throw std::domain_error("chi_square_cdf: df must be >= 1");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    return regularized_gamma_p(0.5 * df, 0.5 * x);
}

/// Quantile of chi-square(df) by bisection on the regularized incomplete
/// gamma CDF; resolves well past 1e-10.
inline double chi_square_quantile(double u, int df) {
    if (!(u >= 0.0 && u < 1.0)) {
        throw std::domain_error("chi_square_quantile: u must lie in [0, 1)");
    }
    if (u == 0.0) {
        return 0.0;
    }
    double lo = 0.0;
    double hi = static_cast<double>(df);
    while (chi_square_cdf(hi, df) < u) {
        hi *= 2.0;
        if (hi > 1e12) {
            throw std::runtime_error("chi_square_quantile: failed to bracket");
        }
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi_square_cdf(mid, df) < u) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-13 * (1.0 + hi)) {
            break;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace sfde
