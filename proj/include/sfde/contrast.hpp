#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sfde/delay_measure.hpp"
#include "sfde/errors.hpp"
#include "sfde/linalg.hpp"
#include "sfde/model.hpp"
#include "sfde/simulate.hpp"

namespace sfde {

/// Per-step data the contrast needs from one observed path: left endpoints
/// X_{t_{k-1}}, delayed functionals H_n(X_{t_{k-1}-.}), and increments
/// Delta_k X. All of it depends only on the data and the delay measure, so
/// it is computed once and shared across every contrast evaluation.
struct ContrastWorkspace {
    int n = 0;          // sampling rate (steps per unit time)
    double epsilon = 0.0;
    std::vector<Eigen::VectorXd> x_prev;
    std::vector<Eigen::VectorXd> h_vals;
    std::vector<Eigen::VectorXd> increments;

    int size() const { return static_cast<int>(increments.size()); }

    static ContrastWorkspace build(const PathGrid& path, const DelayMeasure& measure) {
        if (path.size() != path.history_len + path.n + 1) {
            throw std::invalid_argument("contrast workspace: path grid length does not match n");
        }
        const DiscreteDelayKernel kernel(measure, path.n);
        if (kernel.max_lag_steps() > path.history_len) {
            throw std::domain_error("contrast workspace: path history shorter than the delay window");
        }
        ContrastWorkspace ws;
        ws.n = path.n;
        ws.epsilon = path.epsilon;
        ws.x_prev.reserve(path.n);
        ws.h_vals.reserve(path.n);
        ws.increments.reserve(path.n);
        for (int k = 1; k <= path.n; ++k) {
            const Eigen::VectorXd& left = path.at(k - 1);
            ws.x_prev.push_back(left);
            ws.h_vals.push_back(kernel.apply(
                [&](int lag) -> const Eigen::VectorXd& { return path.at(k - 1 - lag); }));
            ws.increments.push_back(path.at(k) - left);
            if (!ws.increments.back().allFinite() || !ws.h_vals.back().allFinite()) {
                throw std::invalid_argument("contrast workspace: non-finite path data");
            }
        }
        return ws;
    }

    /// Sub-path workspace covering `count` steps starting at step `first`
    /// (0-based). Keeps the original sampling rate.
    ContrastWorkspace slice(int first, int count) const {
        if (first < 0 || count < 0 || first + count > size()) {
            throw std::invalid_argument("contrast workspace: slice out of range");
        }
        ContrastWorkspace ws;
        ws.n = n;
        ws.epsilon = epsilon;
        ws.x_prev.assign(x_prev.begin() + first, x_prev.begin() + first + count);
        ws.h_vals.assign(h_vals.begin() + first, h_vals.begin() + first + count);
        ws.increments.assign(increments.begin() + first, increments.begin() + first + count);
        return ws;
    }
};

/// P_k(theta) = Delta_k X - (1/n) b(X_{t_{k-1}}, H_n(X_{t_{k-1}-.}), theta),
/// k = 1..n.
inline Eigen::VectorXd residual_pk(const ContrastWorkspace& ws, const ModelSpec& spec, int k,
                                   const Eigen::VectorXd& theta) {
    if (k < 1 || k > ws.size()) {
        throw std::invalid_argument("residual_pk: step index out of range");
    }
    const int i = k - 1;
    return ws.increments[i] -
           spec.drift(ws.x_prev[i], ws.h_vals[i], theta) / static_cast<double>(ws.n);
}

/// Local-Gauss contrast
///   U(theta) = sum_k { log det Xi_{k-1}(beta)
///                      + (n/eps^2) P_k^T Xi_{k-1}^{-1} P_k },
/// with Xi_{k-1} = sigma*sigma^T at the step's left endpoint. One Cholesky
/// factorization per step; the quadratic form is a triangular solve.
inline double contrast(const ContrastWorkspace& ws, const ModelSpec& spec,
                       const Eigen::VectorXd& theta, double epsilon, int n) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("contrast: epsilon must be positive");
    }
    const Eigen::VectorXd beta = spec.beta_of(theta);
    const double rate = static_cast<double>(n) / (epsilon * epsilon);
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (int i = 0; i < ws.size(); ++i) {
        const Eigen::MatrixXd l = check_sigma_pd(spec, ws.x_prev[i], ws.h_vals[i], beta);
        const Eigen::VectorXd p =
            ws.increments[i] - inv_n * spec.drift(ws.x_prev[i], ws.h_vals[i], theta);
        total += chol_log_det(l) + rate * chol_quad_form(l, p);
    }
    if (!std::isfinite(total)) {
        throw non_finite_error("contrast: accumulated value is not finite");
    }
    return total;
}

/// Central finite-difference gradient of the contrast. Per-coordinate step
/// max(1e-6, 1e-6 |theta_i|); perturbed points are clamped into the closed
/// box and the difference uses the realised spacing.
inline Eigen::VectorXd contrast_gradient(const ContrastWorkspace& ws, const ModelSpec& spec,
                                         const Eigen::VectorXd& theta, double epsilon, int n) {
    const Eigen::VectorXd lo = spec.box.lo();
    const Eigen::VectorXd hi = spec.box.hi();
    Eigen::VectorXd grad(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double step = std::max(1e-6, 1e-6 * std::abs(theta[i]));
        Eigen::VectorXd up = theta, down = theta;
        up[i] = std::min(theta[i] + step, hi[i]);
        down[i] = std::max(theta[i] - step, lo[i]);
        const double spacing = up[i] - down[i];
        grad[i] = (contrast(ws, spec, up, epsilon, n) - contrast(ws, spec, down, epsilon, n)) /
                  spacing;
    }
    return grad;
}

} // namespace sfde
