#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "sfde/estimate.hpp"
#include "sfde/simulate.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testutil::vec1;
using testutil::vec2;
using testutil::vec4;

namespace {

sfde::PathGrid benchmark_path(int n, double epsilon, std::uint64_t seed) {
    sfde::SimConfig cfg;
    cfg.n = n;
    cfg.epsilon = epsilon;
    cfg.seed = seed;
    return sfde::simulate_path(sfde::builtin_benchmark(), cfg, vec4(1.0, 2.0, 3.0, 4.0));
}

} // namespace

TEST_CASE("closed form matches the contrast optimizer on benchmark paths", "[estimate]") {
    const auto spec = sfde::builtin_benchmark();
    const auto path = benchmark_path(100, 0.1, 2023);
    const auto theta_star = sfde::closed_form_benchmark(path);
    REQUIRE(spec.box.contains(theta_star));
    for (int i = 0; i < 4; ++i) {
        REQUIRE(theta_star[i] > spec.box.lo()[i] + 0.05);
        REQUIRE(theta_star[i] < spec.box.hi()[i] - 0.05);
    }

    const auto ws = sfde::ContrastWorkspace::build(path, spec.delay);
    const auto result = sfde::minimize_contrast(ws, spec, 0.1, 100, spec.box.center());
    REQUIRE(result.converged);
    REQUIRE((result.theta_hat - theta_star).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("optimizer basics on a convex instance", "[estimate]") {
    // constant-drift scalar model: the minimizer is available in closed form
    const auto spec = testutil::constant_drift_model();
    sfde::SimConfig cfg;
    cfg.n = 50;
    cfg.epsilon = 0.5;
    cfg.seed = 6;
    const auto path = sfde::simulate_path(spec, cfg, vec2(0.3, 1.0));
    const auto ws = sfde::ContrastWorkspace::build(path, spec.delay);

    // stationarity: alpha = X_1 - X_0 summed, beta^2 = eps^-2 sum residuals^2
    const double alpha_hat = path.at(50)[0] - path.at(0)[0];
    double s = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double resid = ws.increments[i][0] - alpha_hat / 50.0;
        s += resid * resid;
    }
    const double beta_hat = std::sqrt(s) / 0.5;
    const auto optimum = vec2(alpha_hat, beta_hat);
    REQUIRE(spec.box.contains(optimum));

    SECTION("starting at the optimum stays there") {
        const auto result = sfde::minimize_contrast(ws, spec, 0.5, 50, optimum);
        REQUIRE(result.converged);
        REQUIRE((result.theta_hat - optimum).cwiseAbs().maxCoeff() <= 1e-5);
        REQUIRE(result.gradient_norm < 1e-6);
    }
    SECTION("different interior starts agree") {
        const auto r1 = sfde::minimize_contrast(ws, spec, 0.5, 50, vec2(-0.9, 1.8));
        const auto r2 = sfde::minimize_contrast(ws, spec, 0.5, 50, vec2(0.8, 0.6));
        REQUIRE(r1.converged);
        REQUIRE(r2.converged);
        REQUIRE((r1.theta_hat - r2.theta_hat).cwiseAbs().maxCoeff() <= 1e-4);
        REQUIRE((r1.theta_hat - optimum).cwiseAbs().maxCoeff() <= 1e-4);
    }
    SECTION("contrast never increases against the start") {
        const auto start = vec2(-0.9, 1.8);
        const auto result = sfde::minimize_contrast(ws, spec, 0.5, 50, start);
        REQUIRE(result.contrast_value <=
                sfde::contrast(ws, spec, start, 0.5, 50));
    }
}

TEST_CASE("optimizer respects the box", "[estimate]") {
    // tiny increments push the unconstrained diffusion estimate below the
    // box floor; the returned point must stay inside the closed box
    const auto spec = testutil::constant_drift_model();
    sfde::ContrastWorkspace ws;
    ws.n = 20;
    ws.epsilon = 1.0;
    for (int i = 0; i < 20; ++i) {
        ws.x_prev.push_back(vec1(0.0));
        ws.h_vals.push_back(vec1(0.0));
        ws.increments.push_back(vec1(1e-6 * (i % 2 == 0 ? 1.0 : -1.0)));
    }
    const auto result = sfde::minimize_contrast(ws, spec, 1.0, 20, vec2(0.0, 1.0));
    REQUIRE(spec.box.contains(result.theta_hat));
    REQUIRE_THAT(result.theta_hat[1], WithinAbs(0.5, 1e-6));  // pinned at beta_lo
    REQUIRE_THROWS_AS(sfde::minimize_contrast(ws, spec, 1.0, 20, vec2(7.0, 1.0)),
                      std::invalid_argument);
}

TEST_CASE("closed-form benchmark estimator", "[estimate]") {
    SECTION("degenerate design raises a domain error") {
        sfde::PathGrid path;
        path.n = 20;
        path.delta = 0.1;
        path.epsilon = 0.1;
        path.history_len = 2;
        for (int i = 0; i < 23; ++i) {
            path.values.push_back(vec2(0.1 * i, 0.0));  // second coordinate flat zero
        }
        REQUIRE_THROWS_AS(sfde::closed_form_benchmark(path), std::domain_error);
    }
    SECTION("dimension check") {
        sfde::PathGrid path;
        path.n = 10;
        path.delta = 0.1;
        path.epsilon = 0.1;
        path.history_len = 1;
        path.values.assign(12, vec1(1.0));
        REQUIRE_THROWS_AS(sfde::closed_form_benchmark(path), std::invalid_argument);
    }
    SECTION("noiseless paths recover the drift up to Euler bias") {
        sfde::SimConfig cfg;
        cfg.n = 100;
        cfg.epsilon = 0.0;
        cfg.seed = 0;
        const auto path = sfde::simulate_path(sfde::builtin_benchmark(), cfg,
                                              vec4(1.0, 2.0, 3.0, 4.0));
        const auto theta = sfde::closed_form_benchmark(path);
        REQUIRE_THAT(theta[0], WithinAbs(1.0, 0.05));
        REQUIRE_THAT(theta[1], WithinAbs(2.0, 0.05));
    }
    SECTION("beta estimates solve the one-dimensional stationarity problem") {
        const auto spec = sfde::builtin_benchmark();
        const auto path = benchmark_path(100, 0.1, 31);
        const auto ws = sfde::ContrastWorkspace::build(path, spec.delay);
        const auto theta_star = sfde::closed_form_benchmark(path);

        // oracle: bisection root of the finite-difference derivative of U in
        // the single beta coordinate, everything else held at the closed form
        for (int j = 2; j <= 3; ++j) {
            auto u_of_beta = [&](double b) {
                Eigen::VectorXd theta = theta_star;
                theta[j] = b;
                return sfde::contrast(ws, spec, theta, 0.1, 100);
            };
            auto du = [&](double b) {
                const double h = 1e-4;
                return (u_of_beta(b + h) - u_of_beta(b - h)) / (2.0 * h);
            };
            double lo = 0.5, hi = 9.0;
            REQUIRE(du(lo) < 0.0);
            REQUIRE(du(hi) > 0.0);
            for (int i = 0; i < 200; ++i) {
                const double mid = 0.5 * (lo + hi);
                (du(mid) < 0.0 ? lo : hi) = mid;
            }
            REQUIRE_THAT(theta_star[j], WithinAbs(0.5 * (lo + hi), 1e-8));
        }
    }
}

TEST_CASE("fisher information", "[estimate]") {
    SECTION("constant scalar model has hand-computable blocks") {
        // alpha0 = 0 freezes the limit path at phi = c, so H = c throughout:
        // I_b = c^2 / beta^2, I_sigma = 2 / beta^2
        const double c = 1.5, beta = 2.0;
        const auto spec = testutil::scalar_delay_model(0.1, c);
        const auto theta0 = vec2(0.0, beta);
        const auto ode = sfde::solve_limit_ode(spec, theta0, 1000);
        const auto fisher = sfde::fisher_info(spec, theta0, ode, 1000);
        REQUIRE_THAT(fisher.i_b(0, 0), WithinRel(c * c / (beta * beta), 1e-6));
        REQUIRE_THAT(fisher.i_sigma(0, 0), WithinRel(2.0 / (beta * beta), 1e-6));
    }
    SECTION("benchmark blocks are diagonal, symmetric, and PD") {
        const auto spec = sfde::builtin_benchmark();
        const auto theta0 = vec4(1.0, 2.0, 3.0, 4.0);
        const auto ode = sfde::solve_limit_ode(spec, theta0, 2000);
        const auto fisher = sfde::fisher_info(spec, theta0, ode, 2000);
        REQUIRE(std::abs(fisher.i_b(0, 1)) < 1e-8);
        REQUIRE(std::abs(fisher.i_b(1, 0)) < 1e-8);
        REQUIRE(std::abs(fisher.i_sigma(0, 1)) < 1e-8);
        REQUIRE(std::abs(fisher.i_sigma(1, 0)) < 1e-8);
        REQUIRE((fisher.i_b - fisher.i_b.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        REQUIRE((fisher.i_sigma - fisher.i_sigma.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        REQUIRE(fisher.i_b(0, 0) > 0.0);
        REQUIRE(fisher.i_sigma(0, 0) > 0.0);

        // the full matrix is the block diagonal
        const auto full = fisher.full();
        REQUIRE(full.rows() == 4);
        REQUIRE(full(0, 0) == fisher.i_b(0, 0));
        REQUIRE(full(2, 2) == fisher.i_sigma(0, 0));
        REQUIRE(full(0, 2) == 0.0);
    }
    SECTION("quadrature self-convergence") {
        const auto spec = sfde::builtin_benchmark();
        const auto theta0 = vec4(1.0, 2.0, 3.0, 4.0);
        const auto ode = sfde::solve_limit_ode(spec, theta0, 2000);
        const auto coarse = sfde::fisher_info(spec, theta0, ode, 1000);
        const auto fine = sfde::fisher_info(spec, theta0, ode, 2000);
        for (int i = 0; i < 2; ++i) {
            REQUIRE_THAT(coarse.i_b(i, i), WithinRel(fine.i_b(i, i), 1e-4));
            REQUIRE_THAT(coarse.i_sigma(i, i), WithinRel(fine.i_sigma(i, i), 1e-4));
        }
    }
    SECTION("resolution mismatch is rejected") {
        const auto spec = sfde::builtin_benchmark();
        const auto theta0 = vec4(1.0, 2.0, 3.0, 4.0);
        const auto ode = sfde::solve_limit_ode(spec, theta0, 1000);
        REQUIRE_THROWS_AS(sfde::fisher_info(spec, theta0, ode, 300), std::invalid_argument);
    }
}

TEST_CASE("standardized errors", "[estimate]") {
    sfde::FisherInfo fisher;
    fisher.i_b = Eigen::MatrixXd::Identity(2, 2);
    fisher.i_sigma = Eigen::MatrixXd::Identity(2, 2);

    SECTION("exact estimate gives zero") {
        const auto theta0 = vec4(1.0, 2.0, 3.0, 4.0);
        const auto [z, chi2] = sfde::standardized_errors(theta0, theta0, fisher, 0.1, 100);
        REQUIRE(z == Eigen::VectorXd::Zero(4));
        REQUIRE(chi2 == 0.0);
    }
    SECTION("identity information is plain rescaling") {
        const auto theta0 = vec4(1.0, 2.0, 3.0, 4.0);
        const auto theta_hat = vec4(1.01, 2.0, 3.0, 4.0);
        const auto [z, chi2] = sfde::standardized_errors(theta_hat, theta0, fisher, 0.1, 100);
        REQUIRE_THAT(z[0], WithinRel(0.1, 1e-12));
        REQUIRE(z[1] == 0.0);
        REQUIRE_THAT(chi2, WithinRel(0.01, 1e-12));
    }
    SECTION("drift and diffusion coordinates scale differently") {
        const auto theta0 = vec4(1.0, 2.0, 3.0, 4.0);
        const auto theta_hat = vec4(1.0, 2.0, 3.0, 4.1);
        const auto [z, chi2] = sfde::standardized_errors(theta_hat, theta0, fisher, 0.1, 100);
        REQUIRE_THAT(z[3], WithinRel(std::sqrt(100.0) * 0.1, 1e-10));
        REQUIRE_THAT(chi2, WithinRel(1.0, 1e-10));
    }
}
