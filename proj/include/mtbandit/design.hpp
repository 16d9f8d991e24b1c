#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mtbandit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Design {
  VectorXd weights;           // probability vector over items
  MatrixXd covariance;        // A(λ) = Σ λ_i Q_i
  double objective_value = 0; // ρ: 1/σ_min for E, max_y ‖y‖²_{A⁻¹} for G
  double certificate_gap = 0; // objective − certified bound on the optimum
  bool converged = false;
  int iterations = 0;          // Newton steps taken
  std::vector<double> trace;   // incumbent objective after each outer round
};

struct SolverOptions {
  double tol = 1e-4;
  int max_iterations = 500;
};

/// E-optimal design over PSD item matrices: maximize σ_min(Σ λ_i Q_i).
/// Throws RANK_DEFICIENT when Σ Q_i is singular. A design with
/// converged=false is returned when the certificate is not reached.
Design solve_e_optimal(const std::vector<MatrixXd>& items, const SolverOptions& options = {});

/// E-optimal design for rank-one items Q_i = z_i z_iᵀ (rows of `items`).
Design solve_e_optimal(const MatrixXd& items, const SolverOptions& options = {});

/// G-optimal design: minimize max_y ‖y‖²_{A(λ)⁻¹} with A(λ) = Σ λ_i z_i z_iᵀ.
/// Items and targets are given as rows. Throws RANK_DEFICIENT or EMPTY_TARGETS.
Design solve_g_optimal(const MatrixXd& items, const MatrixXd& targets, const SolverOptions& options = {});

/// Suboptimality certificate of a G design, recomputed from its weights alone:
/// max_y ‖y‖²_{A(λ)⁻¹} minus a dual lower bound on the optimal value.
/// Throws SINGULAR_COVARIANCE when A(λ) is not invertible.
double kw_gap(const Design& design, const MatrixXd& items, const MatrixXd& targets);
double kw_gap(const VectorXd& weights, const MatrixXd& items, const MatrixXd& targets);

/// Σ λ_i z_i z_iᵀ for rows z_i.
MatrixXd design_covariance(const VectorXd& weights, const MatrixXd& items);
MatrixXd design_covariance(const VectorXd& weights, const std::vector<MatrixXd>& items);

/// max_y yᵀ A⁻¹ y. Throws SINGULAR_COVARIANCE.
double g_criterion(const MatrixXd& covariance, const MatrixXd& targets);

/// ‖A⁻¹‖ = 1/σ_min(A). Throws SINGULAR_COVARIANCE.
double e_criterion(const MatrixXd& covariance);

/// All differences z_i − z_j over unordered pairs i < j of the rows.
MatrixXd difference_targets(const MatrixXd& rows);

}  // namespace mtbandit
