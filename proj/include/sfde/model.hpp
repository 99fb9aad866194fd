#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "sfde/delay_measure.hpp"
#include "sfde/errors.hpp"
#include "sfde/linalg.hpp"

namespace sfde {

/// Bounded box of admissible parameters: alpha (drift) and beta (diffusion)
/// blocks, lo < hi componentwise.
struct ParameterBox {
    Eigen::VectorXd alpha_lo, alpha_hi;
    Eigen::VectorXd beta_lo, beta_hi;

    ParameterBox(Eigen::VectorXd alo, Eigen::VectorXd ahi, Eigen::VectorXd blo, Eigen::VectorXd bhi)
        : alpha_lo(std::move(alo)), alpha_hi(std::move(ahi)),
          beta_lo(std::move(blo)), beta_hi(std::move(bhi)) {
        if (alpha_lo.size() != alpha_hi.size() || beta_lo.size() != beta_hi.size()) {
            throw std::invalid_argument("parameter box: bound dimensions mismatch");
        }
        auto check = [](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
            for (Eigen::Index i = 0; i < lo.size(); ++i) {
                if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
                    throw std::invalid_argument("parameter box: need finite lo < hi componentwise");
                }
            }
        };
        check(alpha_lo, alpha_hi);
        check(beta_lo, beta_hi);
    }

    int p() const { return static_cast<int>(alpha_lo.size()); }
    int q() const { return static_cast<int>(beta_lo.size()); }
    int dim() const { return p() + q(); }

    Eigen::VectorXd lo() const {
        Eigen::VectorXd v(dim());
        v << alpha_lo, beta_lo;
        return v;
    }
    Eigen::VectorXd hi() const {
        Eigen::VectorXd v(dim());
        v << alpha_hi, beta_hi;
        return v;
    }
    Eigen::VectorXd center() const { return 0.5 * (lo() + hi()); }

    bool contains(const Eigen::VectorXd& theta) const {
        if (theta.size() != dim()) {
            return false;
        }
        const Eigen::VectorXd l = lo(), h = hi();
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            if (!(theta[i] >= l[i] && theta[i] <= h[i])) {
                return false;
            }
        }
        return true;
    }

    /// Projection onto the closed box.
    Eigen::VectorXd clamp(const Eigen::VectorXd& theta) const {
        return theta.cwiseMax(lo()).cwiseMin(hi());
    }
};

/// History supplied as a deterministic function phi(t) on [-delta, 0].
struct DeterministicHistory {
    std::function<Eigen::VectorXd(double)> phi;
};

/// History generated by an auxiliary SDE started at t = -delta. The
/// diffusion callback receives epsilon and returns the full (already
/// epsilon-scaled) matrix, so epsilon = 0 yields the deterministic
/// pre-period dynamics.
struct SdeHistory {
    Eigen::VectorXd initial;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> diffusion;
    int brownian_dim = 0;
};

using HistoryLaw = std::variant<DeterministicHistory, SdeHistory>;

/// Complete description of one SFDE model. Drift takes the full parameter
/// vector theta = (alpha, beta); diffusion takes only beta. Both must be
/// pure functions.
struct ModelSpec {
    std::string name;
    int d = 0;  // state dimension
    int r = 0;  // Brownian dimension
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                                  const Eigen::VectorXd& theta)>
        drift;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                                  const Eigen::VectorXd& beta)>
        diffusion;
    ParameterBox box;
    DelayMeasure delay;
    HistoryLaw history;

    Eigen::VectorXd alpha_of(const Eigen::VectorXd& theta) const { return theta.head(box.p()); }
    Eigen::VectorXd beta_of(const Eigen::VectorXd& theta) const { return theta.tail(box.q()); }
};

/// Cholesky factor of sigma*sigma^T at (x, h, beta). Fails with a message
/// naming the offending point when a pivot drops to pd_pivot_tolerance.
inline Eigen::MatrixXd check_sigma_pd(const ModelSpec& spec, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& h, const Eigen::VectorXd& beta) {
    const Eigen::MatrixXd s = spec.diffusion(x, h, beta);
    const Eigen::MatrixXd a = s * s.transpose();
    try {
        return cholesky_lower(a, pd_pivot_tolerance);
    } catch (const not_positive_definite_error& e) {
        std::ostringstream msg;
        msg << "sigma*sigma^T not positive definite (pivot " << e.pivot_value << " at index "
            << e.pivot_index << ") for x = [" << x.transpose() << "], h = [" << h.transpose()
            << "], beta = [" << beta.transpose() << "]";
        throw model_violation_error(msg.str());
    }
}

/// The built-in 2-dimensional benchmark: drift (a1*h2, a2*h1), diffusion
/// diag(b1*sqrt(1+h2^2), b2*sqrt(1+h1^2)), Dirac delay at delta = 1/10, and a
/// pre-period SDE with drift (5*x2, 6*x1), diffusion
/// diag(7*eps*sqrt(1+x2^2), 8*eps*sqrt(1+x1^2)) started at (1, 2).
inline ModelSpec builtin_benchmark() {
    const double delta = 0.1;
    Eigen::VectorXd lo(2), hi(2);
    lo << 0.1, 0.1;
    hi << 10.0, 10.0;
    ParameterBox box(lo, hi, lo, hi);

    auto drift = [](const Eigen::VectorXd& /*x*/, const Eigen::VectorXd& h,
                    const Eigen::VectorXd& theta) {
        Eigen::VectorXd b(2);
        b << theta[0] * h[1], theta[1] * h[0];
        return b;
    };
    auto diffusion = [](const Eigen::VectorXd& /*x*/, const Eigen::VectorXd& h,
                        const Eigen::VectorXd& beta) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
        s(0, 0) = beta[0] * std::sqrt(1.0 + h[1] * h[1]);
        s(1, 1) = beta[1] * std::sqrt(1.0 + h[0] * h[0]);
        return s;
    };

    SdeHistory history;
    history.initial = Eigen::Vector2d(1.0, 2.0);
    history.drift = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd b(2);
        b << 5.0 * x[1], 6.0 * x[0];
        return b;
    };
    history.diffusion = [](const Eigen::VectorXd& x, double eps) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
        s(0, 0) = 7.0 * eps * std::sqrt(1.0 + x[1] * x[1]);
        s(1, 1) = 8.0 * eps * std::sqrt(1.0 + x[0] * x[0]);
        return s;
    };
    history.brownian_dim = 2;

    return ModelSpec{"benchmark2d", 2,     2,
                     drift,         diffusion, box,
                     DelayMeasure::dirac(delta), HistoryLaw(history)};
}

} // namespace sfde
