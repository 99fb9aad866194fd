#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sfde {

/// Number of grid steps covering the delay horizon: floor(n * delta), with a
/// tiny relative nudge so that products like 100 * 0.1 do not land one ulp
/// below an integer.
inline int delay_steps(int n, double delta) {
    const double x = static_cast<double>(n) * delta;
    return static_cast<int>(std::floor(x + 1e-12 * std::max(1.0, x)));
}

/// Finite measure mu on [0, delta]: point masses plus an optional
/// piecewise-constant density. Immutable after construction; interval masses
/// are exact, which keeps the grid discretization of the delay functional
/// exactly testable.
class DelayMeasure {
  public:
    struct DensityPiece {
        double a = 0.0;     // interval [a, b)
        double b = 0.0;
        double height = 0.0;
    };

    DelayMeasure(double delta,
                 std::vector<std::pair<double, double>> atoms,
                 std::vector<DensityPiece> density = {})
        : delta_(delta), atoms_(std::move(atoms)), density_(std::move(density)) {
        validate();
    }

    /// Point mass at `location` (defaults to the full horizon delta).
    static DelayMeasure dirac(double delta, double mass = 1.0) {
        return DelayMeasure(delta, {{delta, mass}});
    }

    static DelayMeasure dirac_at(double delta, double location, double mass = 1.0) {
        return DelayMeasure(delta, {{location, mass}});
    }

    /// Constant density `height` on [0, delta).
    static DelayMeasure uniform(double delta, double height) {
        return DelayMeasure(delta, {}, {{0.0, delta, height}});
    }

    double delta() const { return delta_; }
    const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }
    const std::vector<DensityPiece>& density() const { return density_; }

    double total_mass() const {
        double m = 0.0;
        for (const auto& [u, w] : atoms_) {
            (void)u;
            m += w;
        }
        for (const auto& piece : density_) {
            m += piece.height * (piece.b - piece.a);
        }
        return m;
    }

    /// mu of the interval between a and b with configurable endpoint
    /// inclusion. Atom masses respect the flags; the density part is
    /// insensitive to them.
    double mass_of_interval(double a, double b, bool include_left, bool include_right) const {
        if (!(0.0 <= a && a <= b && b <= delta_)) {
            std::ostringstream msg;
            msg << "interval [" << a << ", " << b << "] not inside [0, " << delta_ << "]";
            throw std::domain_error(msg.str());
        }
        double m = 0.0;
        for (const auto& [u, w] : atoms_) {
            const bool above = u > a || (u == a && include_left);
            const bool below = u < b || (u == b && include_right);
            if (above && below) {
                m += w;
            }
        }
        for (const auto& piece : density_) {
            const double overlap = std::min(b, piece.b) - std::max(a, piece.a);
            if (overlap > 0.0) {
                m += piece.height * overlap;
            }
        }
        return m;
    }

  private:
    void validate() const {
        if (!(delta_ > 0.0) || !std::isfinite(delta_)) {
            throw std::invalid_argument("delay measure: delta must be positive and finite");
        }
        for (const auto& [u, w] : atoms_) {
            if (!(u >= 0.0 && u <= delta_)) {
                throw std::invalid_argument("delay measure: atom location outside [0, delta]");
            }
            if (!(w > 0.0) || !std::isfinite(w)) {
                throw std::invalid_argument("delay measure: atom mass must be positive");
            }
        }
        for (const auto& piece : density_) {
            if (!(piece.a >= 0.0 && piece.a < piece.b && piece.b <= delta_)) {
                throw std::invalid_argument("delay measure: density interval malformed or outside [0, delta]");
            }
            if (!(piece.height >= 0.0) || !std::isfinite(piece.height)) {
                throw std::invalid_argument("delay measure: density height must be nonnegative");
            }
        }
        for (std::size_t i = 0; i < density_.size(); ++i) {
            for (std::size_t j = i + 1; j < density_.size(); ++j) {
                const double lo = std::max(density_[i].a, density_[j].a);
                const double hi = std::min(density_[i].b, density_[j].b);
                if (lo < hi) {
                    throw std::invalid_argument("delay measure: density intervals overlap");
                }
            }
        }
        if (!(total_mass() > 0.0) || !std::isfinite(total_mass())) {
            throw std::invalid_argument("delay measure: total mass must be positive and finite");
        }
    }

    double delta_;
    std::vector<std::pair<double, double>> atoms_;
    std::vector<DensityPiece> density_;
};

/// Sampled history on the observation grid: values at t = -i/n for
/// i = floor(n*delta) down to 0, index 0 being the oldest point.
struct HistorySegment {
    std::vector<Eigen::VectorXd> values;
    int n = 0;
    int d = 0;

    HistorySegment(std::vector<Eigen::VectorXd> values_, int n_, double delta, int d_)
        : values(std::move(values_)), n(n_), d(d_) {
        const int expected = delay_steps(n, delta) + 1;
        if (static_cast<int>(values.size()) != expected) {
            throw std::invalid_argument("history segment: length must be floor(n*delta) + 1");
        }
        for (const auto& v : values) {
            if (v.size() != d || !v.allFinite()) {
                throw std::invalid_argument("history segment: entries must be finite d-vectors");
            }
        }
    }

    /// Value at lag j/n behind the segment's right endpoint (t = 0).
    const Eigen::VectorXd& at_lag(int j) const { return values[values.size() - 1 - j]; }
};

/// Grid weights of the discretized delay functional at resolution n:
/// weight at lag j/n is mu([j/n, (j+1)/n)) for j < M = floor(n*delta), and
/// mu([M/n, delta]) (closed) at the final lag M/n. Weights sum to the total
/// mass. Stored both dense and as a nonzero list; atomic measures make the
/// per-step cost O(#atoms).
class DiscreteDelayKernel {
  public:
    DiscreteDelayKernel(const DelayMeasure& measure, int n) : n_(n) {
        if (n < 1) {
            throw std::invalid_argument("delay kernel: n must be >= 1");
        }
        const int m = delay_steps(n, measure.delta());
        weights_.resize(m + 1);
        for (int j = 0; j < m; ++j) {
            weights_[j] = measure.mass_of_interval(static_cast<double>(j) / n,
                                                   static_cast<double>(j + 1) / n,
                                                   /*include_left=*/true, /*include_right=*/false);
        }
        weights_[m] = measure.mass_of_interval(static_cast<double>(m) / n, measure.delta(),
                                               /*include_left=*/true, /*include_right=*/true);
        for (int j = 0; j <= m; ++j) {
            if (weights_[j] != 0.0) {
                nonzero_.emplace_back(j, weights_[j]);
            }
        }
    }

    int n() const { return n_; }
    int max_lag_steps() const { return static_cast<int>(weights_.size()) - 1; }
    int window_length() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }

    /// H_n evaluated through an accessor `window(j)` returning the path value
    /// at lag j/n, j = 0..max_lag_steps().
    template <class WindowAtLag>
    Eigen::VectorXd apply(WindowAtLag&& window) const {
        Eigen::VectorXd h = weights_.empty() ? Eigen::VectorXd() : Eigen::VectorXd(window(0).size());
        h.setZero();
        for (const auto& [j, w] : nonzero_) {
            h += w * window(j);
        }
        return h;
    }

  private:
    int n_;
    std::vector<double> weights_;
    std::vector<std::pair<int, double>> nonzero_;
};

/// Exact delay functional H(F_{t-.}) = int_0^delta F_{t-u} mu(du). The
/// accessor maps a lag u in [0, delta] to the path value F_{t-u}. Atom
/// contributions are exact; each density piece uses composite midpoint
/// quadrature with at least `resolution` cells per unit lag.
template <class PathAtLag>
Eigen::VectorXd h_exact(const DelayMeasure& measure, PathAtLag&& path, int resolution) {
    if (resolution < 1) {
        throw std::invalid_argument("h_exact: resolution must be >= 1");
    }
    Eigen::VectorXd h;
    auto accumulate = [&h](double w, const Eigen::VectorXd& v) {
        if (h.size() == 0) {
            h = w * v;
        } else {
            h += w * v;
        }
    };
    for (const auto& [u, w] : measure.atoms()) {
        accumulate(w, path(u));
    }
    for (const auto& piece : measure.density()) {
        if (piece.height == 0.0) {
            continue;
        }
        const double len = piece.b - piece.a;
        const int cells = std::max(1, static_cast<int>(std::ceil(len * resolution)));
        const double dx = len / cells;
        for (int i = 0; i < cells; ++i) {
            const double u = piece.a + (i + 0.5) * dx;
            accumulate(piece.height * dx, path(u));
        }
    }
    if (h.size() == 0) {
        throw std::invalid_argument("h_exact: measure has no support");
    }
    return h;
}

/// Discretized delay functional H_n over a lag-indexed window
/// (window[j] = X at lag j/n). The window must cover lags up to
/// floor(n*delta)/n.
inline Eigen::VectorXd h_discrete(const DelayMeasure& measure,
                                  const std::vector<Eigen::VectorXd>& window, int n) {
    const DiscreteDelayKernel kernel(measure, n);
    if (static_cast<int>(window.size()) < kernel.window_length()) {
        std::ostringstream msg;
        msg << "h_discrete: window length " << window.size() << " < required "
            << kernel.window_length();
        throw std::domain_error(msg.str());
    }
    return kernel.apply([&window](int j) -> const Eigen::VectorXd& { return window[j]; });
}

} // namespace sfde
