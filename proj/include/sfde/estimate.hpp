#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sfde/contrast.hpp"
#include "sfde/delay_measure.hpp"
#include "sfde/errors.hpp"
#include "sfde/linalg.hpp"
#include "sfde/model.hpp"
#include "sfde/simulate.hpp"

namespace sfde {

struct EstimationResult {
    Eigen::VectorXd theta_hat;
    double contrast_value = 0.0;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
};

/// Block-diagonal asymptotic information: drift block (p x p) and diffusion
/// block (q x q), both symmetric positive definite.
struct FisherInfo {
    Eigen::MatrixXd i_b;
    Eigen::MatrixXd i_sigma;

    Eigen::MatrixXd full() const {
        const Eigen::Index p = i_b.rows(), q = i_sigma.rows();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p + q, p + q);
        m.topLeftCorner(p, p) = i_b;
        m.bottomRightCorner(q, q) = i_sigma;
        return m;
    }
};

namespace detail {

/// Contrast wrapped for the optimizer: evaluation failures and non-finite
/// values count as +inf so the search simply avoids them.
inline double guarded_contrast(const ContrastWorkspace& ws, const ModelSpec& spec,
                               const Eigen::VectorXd& theta, double epsilon, int n) {
    try {
        const double u = contrast(ws, spec, theta, epsilon, n);
        return std::isfinite(u) ? u : std::numeric_limits<double>::infinity();
    } catch (const model_violation_error&) {
        return std::numeric_limits<double>::infinity();
    } catch (const non_finite_error&) {
        return std::numeric_limits<double>::infinity();
    }
}

} // namespace detail

/// Minimize the contrast over the closed parameter box: Nelder-Mead with
/// every trial vertex projected into the box (one restart from the incumbent
/// to shake off premature contraction), then a single projected-gradient
/// polish with a backtracking line search. Stops when the simplex diameter
/// falls below 1e-8 * (1 + |theta|) or after 2000 iterations in total.
inline EstimationResult minimize_contrast(const ContrastWorkspace& ws, const ModelSpec& spec,
                                          double epsilon, int n, const Eigen::VectorXd& start) {
    if (!spec.box.contains(start)) {
        throw std::invalid_argument("minimize_contrast: start outside the parameter box");
    }
    const int dim = spec.box.dim();
    const int max_iterations = 2000;
    const double tol = 1e-8;
    auto f = [&](const Eigen::VectorXd& theta) {
        return detail::guarded_contrast(ws, spec, theta, epsilon, n);
    };

    int iterations = 0;
    bool converged = false;

    auto nelder_mead = [&](Eigen::VectorXd x0) {
        std::vector<Eigen::VectorXd> vert(dim + 1);
        std::vector<double> fv(dim + 1);
        vert[0] = x0;
        for (int i = 0; i < dim; ++i) {
            Eigen::VectorXd v = x0;
            const double step = 0.05 * (spec.box.hi()[i] - spec.box.lo()[i]);
            v[i] = (x0[i] + step <= spec.box.hi()[i]) ? x0[i] + step : x0[i] - step;
            vert[i + 1] = v;
        }
        for (int i = 0; i <= dim; ++i) {
            fv[i] = f(vert[i]);
        }
        std::vector<int> order(dim + 1);
        while (iterations < max_iterations) {
            ++iterations;
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
            const int best = order[0], worst = order[dim], second_worst = order[dim - 1];

            double diameter = 0.0;
            for (int i = 0; i <= dim; ++i) {
                diameter = std::max(diameter,
                                    (vert[i] - vert[best]).cwiseAbs().maxCoeff());
            }
            if (diameter < tol * (1.0 + vert[best].cwiseAbs().maxCoeff())) {
                converged = true;
                break;
            }

            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
            for (int i = 0; i <= dim; ++i) {
                if (i != worst) {
                    centroid += vert[i];
                }
            }
            centroid /= dim;

            auto clamped = [&](double coeff) {
                return spec.box.clamp(centroid + coeff * (centroid - vert[worst]));
            };
            const Eigen::VectorXd reflected = clamped(1.0);
            const double f_reflected = f(reflected);
            if (f_reflected < fv[best]) {
                const Eigen::VectorXd expanded = clamped(2.0);
                const double f_expanded = f(expanded);
                if (f_expanded < f_reflected) {
                    vert[worst] = expanded;
                    fv[worst] = f_expanded;
                } else {
                    vert[worst] = reflected;
                    fv[worst] = f_reflected;
                }
            } else if (f_reflected < fv[second_worst]) {
                vert[worst] = reflected;
                fv[worst] = f_reflected;
            } else {
                const Eigen::VectorXd contracted =
                    f_reflected < fv[worst] ? clamped(0.5) : clamped(-0.5);
                const double f_contracted = f(contracted);
                if (f_contracted < std::min(fv[worst], f_reflected)) {
                    vert[worst] = contracted;
                    fv[worst] = f_contracted;
                } else {
                    for (int i = 0; i <= dim; ++i) {
                        if (i == best) {
                            continue;
                        }
                        vert[i] = spec.box.clamp(vert[best] + 0.5 * (vert[i] - vert[best]));
                        fv[i] = f(vert[i]);
                    }
                }
            }
        }
        int best = 0;
        for (int i = 1; i <= dim; ++i) {
            if (fv[i] < fv[best]) {
                best = i;
            }
        }
        return std::make_pair(vert[best], fv[best]);
    };

    auto [x, fx] = nelder_mead(spec.box.clamp(start));
    if (std::isfinite(fx)) {
        converged = false;
        std::tie(x, fx) = nelder_mead(x);
    }
    if (!std::isfinite(fx)) {
        throw optimization_failed_error("minimize_contrast: every contrast evaluation was non-finite");
    }

    // Projected-gradient polish: one backtracking descent pass.
    Eigen::VectorXd grad = contrast_gradient(ws, spec, x, epsilon, n);
    double t = 1.0 / (1.0 + grad.norm());
    for (int attempt = 0; attempt < 40; ++attempt) {
        const Eigen::VectorXd candidate = spec.box.clamp(x - t * grad);
        const double fc = f(candidate);
        if (fc < fx) {
            x = candidate;
            fx = fc;
            break;
        }
        t *= 0.5;
    }

    EstimationResult result;
    result.theta_hat = x;
    result.contrast_value = fx;
    result.iterations = iterations;
    result.converged = converged;
    result.gradient_norm = contrast_gradient(ws, spec, x, epsilon, n).norm();
    return result;
}

/// Closed-form estimator of the 2-d benchmark. The drift estimates are the
/// stationarity solutions of dU/dalpha = 0,
///   alpha_1 = n * sum_k Dx1_k H2_k / (1 + H2_k^2) / sum_k H2_k^2 / (1 + H2_k^2),
/// and the diffusion estimates are
///   beta_j = (1/eps) * sqrt( sum_k (Dxj_k - alpha_j H_k / n)^2 / (1 + H_k^2) ),
/// each beta_j using its own alpha_j in the residual.
inline Eigen::VectorXd closed_form_benchmark(const PathGrid& path) {
    if (path.d() != 2) {
        throw std::invalid_argument("closed_form_benchmark: path is not 2-dimensional");
    }
    const ModelSpec bench = builtin_benchmark();
    const ContrastWorkspace ws = ContrastWorkspace::build(path, bench.delay);
    const double n = static_cast<double>(ws.n);

    // coordinate 0 is driven by H of coordinate 1 and vice versa
    auto estimate_pair = [&](int coord, int h_coord) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < ws.size(); ++i) {
            const double hval = ws.h_vals[i][h_coord];
            const double weight = 1.0 + hval * hval;
            num += ws.increments[i][coord] * hval / weight;
            den += hval * hval / weight;
        }
        if (den == 0.0) {
            throw std::domain_error("closed_form_benchmark: degenerate path (H identically zero)");
        }
        const double alpha = n * num / den;
        double s = 0.0;
        for (int i = 0; i < ws.size(); ++i) {
            const double hval = ws.h_vals[i][h_coord];
            const double resid = ws.increments[i][coord] - alpha * hval / n;
            s += resid * resid / (1.0 + hval * hval);
        }
        const double beta = std::sqrt(s) / path.epsilon;
        return std::make_pair(alpha, beta);
    };

    const auto [a1, b1] = estimate_pair(0, 1);
    const auto [a2, b2] = estimate_pair(1, 0);
    Eigen::VectorXd theta(4);
    theta << a1, a2, b1, b2;
    return theta;
}

/// Fisher information I(theta0) by trapezoid quadrature along the limit path:
///   I_b^{ij}     = int_0^1 (d_i b)^T [ss^T]^{-1} (d_j b) ds,
///   I_sigma^{ij} = 1/2 int_0^1 tr[ (d_i ss^T)(ss^T)^{-1}(d_j ss^T)(ss^T)^{-1} ] ds,
/// with parameter derivatives by central differences (step 1e-6) and the
/// delay functional discretized on the dense path's own grid.
inline FisherInfo fisher_info(const ModelSpec& spec, const Eigen::VectorXd& theta0,
                              const PathGrid& ode, int quad_resolution) {
    if (quad_resolution < 1 || ode.n % quad_resolution != 0) {
        throw std::invalid_argument("fisher_info: quad_resolution must divide the dense resolution");
    }
    const int p = spec.box.p(), q = spec.box.q();
    const int stride = ode.n / quad_resolution;
    const DiscreteDelayKernel kernel(spec.delay, ode.n);
    if (kernel.max_lag_steps() > ode.history_len) {
        throw std::invalid_argument("fisher_info: dense path does not cover [-delta, 1]");
    }
    const Eigen::VectorXd beta0 = spec.beta_of(theta0);
    const double fd_step = 1e-6;

    Eigen::MatrixXd i_b = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd i_sigma = Eigen::MatrixXd::Zero(q, q);
    for (int node = 0; node <= quad_resolution; ++node) {
        const int idx = node * stride;
        const Eigen::VectorXd& x = ode.at(idx);
        const Eigen::VectorXd h =
            kernel.apply([&](int lag) -> const Eigen::VectorXd& { return ode.at(idx - lag); });

        const Eigen::MatrixXd l = check_sigma_pd(spec, x, h, beta0);

        std::vector<Eigen::VectorXd> db(p);
        for (int i = 0; i < p; ++i) {
            Eigen::VectorXd up = theta0, down = theta0;
            up[i] += fd_step;
            down[i] -= fd_step;
            db[i] = (spec.drift(x, h, up) - spec.drift(x, h, down)) / (2.0 * fd_step);
        }
        std::vector<Eigen::MatrixXd> dsig(q);
        for (int j = 0; j < q; ++j) {
            Eigen::VectorXd up = beta0, down = beta0;
            up[j] += fd_step;
            down[j] -= fd_step;
            const Eigen::MatrixXd su = spec.diffusion(x, h, up);
            const Eigen::MatrixXd sd = spec.diffusion(x, h, down);
            dsig[j] = (su * su.transpose() - sd * sd.transpose()) / (2.0 * fd_step);
        }

        const double weight =
            (node == 0 || node == quad_resolution) ? 0.5 / quad_resolution : 1.0 / quad_resolution;
        std::vector<Eigen::VectorXd> solved_db(p);
        for (int i = 0; i < p; ++i) {
            solved_db[i] = chol_solve(l, db[i]);
        }
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j < p; ++j) {
                i_b(i, j) += weight * db[i].dot(solved_db[j]);
            }
        }
        std::vector<Eigen::MatrixXd> solved_dsig(q);
        for (int j = 0; j < q; ++j) {
            solved_dsig[j] = chol_solve(l, dsig[j]);
        }
        for (int i = 0; i < q; ++i) {
            for (int j = 0; j < q; ++j) {
                i_sigma(i, j) += 0.5 * weight * (solved_dsig[i] * solved_dsig[j]).trace();
            }
        }
    }

    i_b = 0.5 * (i_b + i_b.transpose()).eval();
    i_sigma = 0.5 * (i_sigma + i_sigma.transpose()).eval();
    auto check_pd = [](const Eigen::MatrixXd& m, const char* name) {
        try {
            cholesky_lower(m, pd_pivot_tolerance);
        } catch (const not_positive_definite_error&) {
            std::ostringstream msg;
            msg << "fisher_info: block " << name << " is not positive definite";
            throw fisher_not_pd_error(msg.str());
        }
    };
    check_pd(i_b, "I_b");
    check_pd(i_sigma, "I_sigma");
    return FisherInfo{i_b, i_sigma};
}

/// Standardized estimation errors and the joint quadratic-form statistic:
///   z_i     = eps^-1 sqrt(I_b^{ii}) (alpha_hat_i - alpha_i),
///   z_{p+j} = sqrt(n) sqrt(I_sigma^{jj}) (beta_hat_j - beta_j),
///   chi2    = v^T I(theta0) v,  v = (eps^-1 (alpha_hat - alpha),
///                                    sqrt(n) (beta_hat - beta)).
inline std::pair<Eigen::VectorXd, double> standardized_errors(const Eigen::VectorXd& theta_hat,
                                                              const Eigen::VectorXd& theta0,
                                                              const FisherInfo& fisher,
                                                              double epsilon, int n) {
    const Eigen::Index p = fisher.i_b.rows(), q = fisher.i_sigma.rows();
    if (theta_hat.size() != p + q || theta0.size() != p + q) {
        throw std::invalid_argument("standardized_errors: dimension mismatch");
    }
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    Eigen::VectorXd v(p + q);
    v.head(p) = (theta_hat.head(p) - theta0.head(p)) / epsilon;
    v.tail(q) = sqrt_n * (theta_hat.tail(q) - theta0.tail(q));

    Eigen::VectorXd z(p + q);
    for (Eigen::Index i = 0; i < p; ++i) {
        z[i] = std::sqrt(fisher.i_b(i, i)) * v[i];
    }
    for (Eigen::Index j = 0; j < q; ++j) {
        z[p + j] = std::sqrt(fisher.i_sigma(j, j)) * v[p + j];
    }
    const double chi2 = v.head(p).dot(fisher.i_b * v.head(p)) +
                        v.tail(q).dot(fisher.i_sigma * v.tail(q));
    return {z, chi2};
}

} // namespace sfde
