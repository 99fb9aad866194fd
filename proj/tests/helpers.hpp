#pragma once

// Small model builders shared by the test suites.

#include <Eigen/Dense>
#include <cmath>

#include "sfde/delay_measure.hpp"
#include "sfde/model.hpp"

namespace testutil {

inline Eigen::VectorXd vec1(double a) {
    Eigen::VectorXd v(1);
    v << a;
    return v;
}

inline Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

inline Eigen::VectorXd vec4(double a, double b, double c, double d) {
    Eigen::VectorXd v(4);
    v << a, b, c, d;
    return v;
}

/// Scalar model dX = alpha * H(X) dt + eps * beta * dW with Dirac delay and a
/// constant deterministic history. p = q = 1, theta = (alpha, beta).
inline sfde::ModelSpec scalar_delay_model(double delta = 0.1, double phi_value = 1.0,
                                          double alpha_lo = -5.0, double alpha_hi = 5.0) {
    auto drift = [](const Eigen::VectorXd&, const Eigen::VectorXd& h,
                    const Eigen::VectorXd& theta) -> Eigen::VectorXd {
        return theta[0] * h;
    };
    auto diffusion = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                        const Eigen::VectorXd& beta) -> Eigen::MatrixXd {
        Eigen::MatrixXd s(1, 1);
        s << beta[0];
        return s;
    };
    sfde::ParameterBox box(vec1(alpha_lo), vec1(alpha_hi), vec1(0.05), vec1(10.0));
    sfde::DeterministicHistory history{
        [phi_value](double) -> Eigen::VectorXd { return vec1(phi_value); }};
    return sfde::ModelSpec{"scalar_delay", 1,   1,
                           drift,          diffusion, box,
                           sfde::DelayMeasure::dirac(delta), sfde::HistoryLaw(history)};
}

/// Constant drift dX = alpha dt + eps * beta dW, zero history. Its contrast
/// minimizer is available in closed form, which makes it a convenient convex
/// instance for optimizer checks.
inline sfde::ModelSpec constant_drift_model() {
    auto drift = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                    const Eigen::VectorXd& theta) -> Eigen::VectorXd { return vec1(theta[0]); };
    auto diffusion = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                        const Eigen::VectorXd& beta) -> Eigen::MatrixXd {
        Eigen::MatrixXd s(1, 1);
        s << beta[0];
        return s;
    };
    sfde::ParameterBox box(vec1(-2.0), vec1(2.0), vec1(0.5), vec1(2.0));
    sfde::DeterministicHistory history{[](double) -> Eigen::VectorXd { return vec1(0.0); }};
    return sfde::ModelSpec{"constant_drift", 1,   1,
                           drift,            diffusion, box,
                           sfde::DelayMeasure::dirac(0.1), sfde::HistoryLaw(history)};
}

/// Pure noise: b = 0, sigma = identity, zero history. Used for the exact
/// increment-law checks.
inline sfde::ModelSpec pure_noise_model() {
    auto drift = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                    const Eigen::VectorXd&) -> Eigen::VectorXd { return vec1(0.0); };
    auto diffusion = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                        const Eigen::VectorXd&) -> Eigen::MatrixXd {
        return Eigen::MatrixXd::Identity(1, 1);
    };
    sfde::ParameterBox box(vec1(-1.0), vec1(1.0), vec1(0.5), vec1(2.0));
    sfde::DeterministicHistory history{[](double) -> Eigen::VectorXd { return vec1(0.0); }};
    return sfde::ModelSpec{"pure_noise", 1,   1,
                           drift,        diffusion, box,
                           sfde::DelayMeasure::dirac(0.1), sfde::HistoryLaw(history)};
}

} // namespace testutil
