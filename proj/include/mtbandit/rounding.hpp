#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mtbandit/design.hpp"

namespace mtbandit {

enum class CriterionKind { kE, kG };

struct RoundingCriterion {
  CriterionKind kind = CriterionKind::kE;
  MatrixXd targets;  // rows y, used by kG only

  static RoundingCriterion e() { return {CriterionKind::kE, {}}; }
  static RoundingCriterion g(MatrixXd targets) { return {CriterionKind::kG, std::move(targets)}; }
};

struct RoundingOptions {
  double zeta = 0.1;
  double scale_round = 1.0;
  /// When set, an uncertified batch raises ROUNDING_FAILED; otherwise it is
  /// returned with certified = false.
  bool require_certificate = true;
};

struct RoundedBatch {
  std::vector<int> sequence;  // item indices, index order, equal items contiguous
  std::vector<int> counts;    // per item, sums to N
  double realized_factor_E = 0.0;               // ‖(ΣS)⁻¹‖ / ‖(N A(λ))⁻¹‖
  std::optional<double> realized_factor_G;      // set for the G criterion
  bool certified = false;     // requested factor ≤ 1 + ζ
  int swaps = 0;              // accepted greedy moves
};

/// ⌈scale_round · 180 d′ / ζ²⌉.
int minimum_batch_size(int dim, double zeta, double scale_round);

/// Converts a continuous design into N discrete draws: largest-remainder
/// apportionment of Nλ, then greedy single-unit moves (budget 10n) only if the
/// (1+ζ) factor is not yet met. Throws N_TOO_SMALL, SINGULAR_COVARIANCE, and
/// ROUNDING_FAILED (when required).
RoundedBatch round_design(const std::vector<MatrixXd>& items, const VectorXd& weights, int n,
                          const RoundingCriterion& criterion, const RoundingOptions& options = {});

/// Rank-one items given as rows z_i (Q_i = z_i z_iᵀ).
RoundedBatch round_design(const MatrixXd& items, const VectorXd& weights, int n, const RoundingCriterion& criterion,
                          const RoundingOptions& options = {});

/// Largest-remainder apportionment of n·weights; ties go to the lowest index.
std::vector<int> apportion(const VectorXd& weights, int n);

}  // namespace mtbandit
