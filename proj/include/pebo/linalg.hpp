#pragma once

#include <Eigen/Dense>

namespace pebo {

/// Matrix exponential. Exact elementwise path for diagonal matrices (the
/// block-diagonal designs used here are diagonal); scaling-and-squaring with
/// a Pade approximant otherwise.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);

bool is_diagonal(const Eigen::MatrixXd& A, double tol = 0.0);

/// Moore-Penrose pseudo-inverse via SVD; singular values below
/// rel_tol * sigma_max are treated as zero.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& M, double rel_tol = 1e-8);

/// Numerical rank with the same relative threshold convention.
int svd_rank(const Eigen::MatrixXd& M, double rel_tol = 1e-8);

/// Singular values, descending.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& M);

}  // namespace pebo
