#pragma once

#include <Eigen/Dense>

namespace mtbandit::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Condition number above which a symmetric solve is regularized.
inline constexpr double kConditionLimit = 1e12;

struct SymmetricInverse {
  MatrixXd inverse;
  bool jittered = false;
};

/// Inverse of a symmetric PSD matrix via eigendecomposition. When the
/// condition number exceeds kConditionLimit a ridge of `jitter * trace / dim`
/// is added first. `inverse` is left empty when the matrix is not positive
/// definite even after the ridge.
SymmetricInverse inverse_spd(const MatrixXd& a, double jitter = 1e-10);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const MatrixXd& a);

/// Largest singular value.
double spectral_norm(const MatrixXd& a);

/// max_j y_jᵀ M y_j over the rows y_j of `targets`.
double max_quadratic_form(const MatrixXd& targets, const MatrixXd& m);

/// Returns (a + aᵀ) / 2.
MatrixXd symmetrize(const MatrixXd& a);

/// Non-negative least squares min ‖a x − b‖ s.t. x ≥ 0 (Lawson–Hanson).
VectorXd nnls(const MatrixXd& a, const VectorXd& b, int max_iterations = 0);

/// Numerical rank of the row stack.
Eigen::Index numerical_rank(const MatrixXd& a, double relative_threshold = 1e-9);

}  // namespace mtbandit::linalg
