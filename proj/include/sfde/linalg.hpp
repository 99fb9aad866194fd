#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "sfde/errors.hpp"

namespace sfde {

/// Pivot floor for Cholesky factorizations of matrices that must be
/// positive definite (sigma*sigma^T, Fisher blocks).
inline constexpr double pd_pivot_tolerance = 1e-12;

/// Lower-triangular Cholesky factor of a symmetric matrix A (lower part is
/// read). Throws not_positive_definite_error when a pivot falls at or below
/// `pivot_tol`. Hand-rolled so the pivot floor is explicit; matrices here
/// are small (d <= a few).
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a, double pivot_tol = pd_pivot_tolerance) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) {
            pivot -= l(j, k) * l(j, k);
        }
        if (!(pivot > pivot_tol)) {
            std::ostringstream msg;
            msg << "matrix is not positive definite: pivot " << pivot << " at index " << j;
            throw not_positive_definite_error(msg.str(), static_cast<int>(j), pivot);
        }
        l(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) {
                s -= l(i, k) * l(j, k);
            }
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

/// log det(L L^T) = 2 sum log L_ii.
inline double chol_log_det(const Eigen::MatrixXd& l) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        s += std::log(l(i, i));
    }
    return 2.0 * s;
}

/// v^T (L L^T)^-1 v via one triangular solve, never an explicit inverse.
inline double chol_quad_form(const Eigen::MatrixXd& l, const Eigen::VectorXd& v) {
    const Eigen::VectorXd y = l.triangularView<Eigen::Lower>().solve(v);
    return y.squaredNorm();
}

/// (L L^T)^-1 B via two triangular solves.
inline Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& l, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd y = l.triangularView<Eigen::Lower>().solve(b);
    return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

} // namespace sfde
