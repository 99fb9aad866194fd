#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sfde/contrast.hpp"
#include "sfde/estimate.hpp"
#include "sfde/errors.hpp"
#include "sfde/model.hpp"
#include "sfde/rng.hpp"
#include "sfde/simulate.hpp"
#include "sfde/stats.hpp"

namespace sfde {

enum class EstimatorKind { closed_form, optimizer };

/// Full description of one replication study: which model, the true
/// parameter, the (n, epsilon) grid, and how each replication is estimated.
struct ExperimentPlan {
    std::shared_ptr<const ModelSpec> model;
    Eigen::VectorXd theta_true;
    std::vector<std::pair<int, double>> grid;  // (n, epsilon) cells
    int replications = 1;
    std::uint64_t master_seed = 0;
    EstimatorKind estimator = EstimatorKind::closed_form;
    bool warm_start = false;
    int ode_resolution = 0;  // 0 = auto (max(2000, n))

    void validate() const {
        if (!model) {
            throw std::invalid_argument("experiment plan: model missing");
        }
        if (replications < 1) {
            throw std::invalid_argument("experiment plan: replications must be >= 1");
        }
        if (grid.empty()) {
            throw std::invalid_argument("experiment plan: empty (n, epsilon) grid");
        }
        for (const auto& [n, eps] : grid) {
            if (n < 1 || !(eps > 0.0 && eps <= 1.0)) {
                throw std::invalid_argument("experiment plan: inadmissible (n, epsilon) cell");
            }
        }
        if (!model->box.contains(theta_true)) {
            throw std::invalid_argument("experiment plan: theta_true outside the box");
        }
        if (estimator == EstimatorKind::closed_form && model->name != "benchmark2d") {
            throw std::invalid_argument(
                "experiment plan: closed-form estimator is only available for benchmark2d");
        }
    }
};

/// Aggregates for one (n, epsilon) cell. Mean and sd run over converged
/// replications only; z/chi2 rows are kept for those replications as well.
struct CellSummary {
    int n = 0;
    double epsilon = 0.0;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    bool sd_defined = false;  // false when fewer than two converged replications
    int failure_count = 0;
    Eigen::MatrixXd z_samples;            // (converged) x (p+q)
    std::vector<double> chi2_samples;     // converged
    std::vector<std::uint64_t> failing_seeds;
};

struct MonteCarloSummary {
    int p = 0;
    int q = 0;
    std::vector<CellSummary> cells;
};

/// Per-replication seed: avalanche mix of (master_seed, n, epsilon bits, j).
inline std::uint64_t replication_seed(std::uint64_t master, int n, double epsilon,
                                      std::uint64_t j) {
    return derive_seed(master, {static_cast<std::uint64_t>(n),
                                std::bit_cast<std::uint64_t>(epsilon), j});
}

/// Run the planned experiment: for each cell, one shared limit path and
/// Fisher matrix at theta_true, then `replications` independent
/// simulate/estimate/standardize rounds with seeds derived per replication.
/// Replications fan out over `workers` threads into index-addressed slots,
/// so the summary is invariant to scheduling and replication order.
inline MonteCarloSummary run_experiment(const ExperimentPlan& plan, int workers = 1) {
    plan.validate();
    if (workers < 1) {
        throw std::invalid_argument("run_experiment: workers must be >= 1");
    }
    const ModelSpec& spec = *plan.model;
    const int p = spec.box.p(), q = spec.box.q();
    const int dim = p + q;
    const int reps = plan.replications;

    MonteCarloSummary summary;
    summary.p = p;
    summary.q = q;

    for (const auto& [n, eps] : plan.grid) {
        if (std::sqrt(static_cast<double>(n)) * eps < 3.0) {
            std::cerr << "warning: sqrt(n)*epsilon = " << std::sqrt(static_cast<double>(n)) * eps
                      << " < 3 for cell (n=" << n << ", eps=" << eps
                      << "); the asymptotic regime may be a poor guide\n";
        }
        const int resolution = plan.ode_resolution > 0 ? plan.ode_resolution : std::max(2000, n);
        const PathGrid ode = solve_limit_ode(spec, plan.theta_true, resolution);
        const FisherInfo fisher = fisher_info(spec, plan.theta_true, ode, resolution);

        std::vector<Eigen::VectorXd> theta_hats(reps);
        std::vector<Eigen::VectorXd> zs(reps);
        std::vector<double> chi2s(reps, 0.0);
        std::vector<char> ok(reps, 0);
        std::vector<std::uint64_t> seeds(reps);

        auto run_one = [&](int j) {
            const std::uint64_t seed = replication_seed(plan.master_seed, n, eps, j);
            seeds[j] = seed;
            try {
                SimConfig cfg;
                cfg.n = n;
                cfg.epsilon = eps;
                cfg.seed = seed;
                const PathGrid path = simulate_path(spec, cfg, plan.theta_true);

                Eigen::VectorXd theta_hat;
                if (plan.estimator == EstimatorKind::closed_form) {
                    theta_hat = closed_form_benchmark(path);
                } else {
                    const ContrastWorkspace ws = ContrastWorkspace::build(path, spec.delay);
                    const Eigen::VectorXd start =
                        plan.warm_start ? plan.theta_true : spec.box.center();
                    const EstimationResult res = minimize_contrast(ws, spec, eps, n, start);
                    if (!res.converged) {
                        return;
                    }
                    theta_hat = res.theta_hat;
                }
                if (!theta_hat.allFinite()) {
                    return;
                }
                const auto [z, chi2] =
                    standardized_errors(theta_hat, plan.theta_true, fisher, eps, n);
                theta_hats[j] = theta_hat;
                zs[j] = z;
                chi2s[j] = chi2;
                ok[j] = 1;
            } catch (const error&) {
            } catch (const std::domain_error&) {
            }
        };

        if (workers == 1) {
            for (int j = 0; j < reps; ++j) {
                run_one(j);
            }
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (int j = next.fetch_add(1); j < reps; j = next.fetch_add(1)) {
                        run_one(j);
                    }
                });
            }
            for (auto& t : pool) {
                t.join();
            }
        }

        CellSummary cell;
        cell.n = n;
        cell.epsilon = eps;
        int good = 0;
        for (int j = 0; j < reps; ++j) {
            if (ok[j]) {
                ++good;
            } else {
                ++cell.failure_count;
                cell.failing_seeds.push_back(seeds[j]);
            }
        }
        if (cell.failure_count > 0.05 * reps) {
            std::ostringstream msg;
            msg << "experiment degenerate: " << cell.failure_count << "/" << reps
                << " replications failed at cell (n=" << n << ", eps=" << eps << ")";
            throw degenerate_experiment_error(msg.str(), cell.failing_seeds);
        }

        cell.mean = Eigen::VectorXd::Zero(dim);
        cell.sd = Eigen::VectorXd::Zero(dim);
        cell.z_samples.resize(good, dim);
        cell.chi2_samples.reserve(good);
        int row = 0;
        for (int j = 0; j < reps; ++j) {
            if (!ok[j]) {
                continue;
            }
            cell.mean += theta_hats[j];
            cell.z_samples.row(row++) = zs[j].transpose();
            cell.chi2_samples.push_back(chi2s[j]);
        }
        if (good > 0) {
            cell.mean /= good;
        }
        if (good > 1) {
            for (int j = 0; j < reps; ++j) {
                if (ok[j]) {
                    cell.sd += (theta_hats[j] - cell.mean).cwiseAbs2();
                }
            }
            cell.sd = (cell.sd / (good - 1)).cwiseSqrt();
            cell.sd_defined = true;
        }
        summary.cells.push_back(std::move(cell));
    }
    return summary;
}

/// Reference law for Q-Q and Kolmogorov-Smirnov diagnostics.
struct ReferenceDist {
    enum Kind { std_normal, chi_square } kind = std_normal;
    int df = 0;

    static ReferenceDist normal() { return {std_normal, 0}; }
    static ReferenceDist chi2(int df) { return {chi_square, df}; }

    double quantile(double u) const {
        return kind == std_normal ? normal_quantile(u) : chi_square_quantile(u, df);
    }
    double cdf(double x) const {
        return kind == std_normal ? normal_cdf(x) : chi_square_cdf(x, df);
    }
};

/// Sorted samples paired with reference quantiles at plotting positions
/// (i - 0.5) / R.
inline std::vector<std::pair<double, double>> qq_data(const std::vector<double>& samples,
                                                      const ReferenceDist& reference) {
    if (samples.empty()) {
        throw std::invalid_argument("qq_data: samples must be nonempty");
    }
    std::vector<double> sorted = samples;
    for (double s : sorted) {
        if (!std::isfinite(s)) {
            throw std::invalid_argument("qq_data: samples must be finite");
        }
    }
    std::sort(sorted.begin(), sorted.end());
    const double r = static_cast<double>(sorted.size());
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double u = (static_cast<double>(i) + 0.5) / r;
        pairs.emplace_back(reference.quantile(u), sorted[i]);
    }
    return pairs;
}

/// Kolmogorov-Smirnov distance sup_x |F_empirical(x) - F_reference(x)|.
inline double ks_distance(const std::vector<double>& samples, const ReferenceDist& reference) {
    if (samples.empty()) {
        throw std::invalid_argument("ks_distance: samples must be nonempty");
    }
    std::vector<double> sorted = samples;
    for (double s : sorted) {
        if (!std::isfinite(s)) {
            throw std::invalid_argument("ks_distance: samples must be finite");
        }
    }
    std::sort(sorted.begin(), sorted.end());
    const double r = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = reference.cdf(sorted[i]);
        d = std::max(d, std::max(f - static_cast<double>(i) / r,
                                 static_cast<double>(i + 1) / r - f));
    }
    return d;
}

} // namespace sfde
