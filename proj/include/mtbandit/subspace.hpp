#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mtbandit/model.hpp"

namespace mtbandit {

struct SubspaceEstimate {
  MatrixXd basis;            // d × k, orthonormal
  VectorXd singular_values;  // all d, descending
  double spectral_gap = 0.0; // σ_k − σ_{k+1} (σ_k when k = d)
};

struct MomentMatrix {
  MatrixXd z;
  int tasks = 0;
  int rounds = 0;
  bool bias_corrected = false;
};

struct RecoveryResult {
  SubspaceEstimate estimate;
  MomentMatrix moment;
  std::uint64_t samples_used = 0;
  int jitter_fallbacks = 0;  // realized Grams regularized (contextual only)
};

/// Top-k left singular subspace of z. Each singular vector is signed so its
/// first entry above 1e-12 in magnitude is positive.
SubspaceEstimate top_k_subspace(const MatrixXd& z, int k);

/// ‖(I − B̂B̂ᵀ)B‖₂. Throws SHAPE_MISMATCH.
double sin_theta(const MatrixXd& estimate, const MatrixXd& truth);
double sin_theta(const SubspaceEstimate& estimate, const MatrixXd& truth);

/// ‖(Σx̄x̄ᵀ)⁻¹ X̄ᵀ‖₂ for the batch rows x̄ = arms[sequence[i]].
double batch_pinv_norm(const MatrixXd& arms, const std::vector<int>& sequence);

/// Moment-based recovery for the linear problem. For every task and each of
/// `rounds` rounds, pulls the whole batch once and forms the least-squares
/// estimate θ̃ = (Σx̄x̄ᵀ)⁻¹Σx̄r; then Z = (1/MT)Σθ̃θ̃ᵀ − (Σx̄x̄ᵀ)⁻¹ (the
/// correction is skipped when bias_correction is false). Task m draws from
/// the stream (seed, "feat", phase, m). Throws SINGULAR_BATCH.
RecoveryResult feat_recover(LinearEnvironment& env, const std::vector<int>& batch, int rounds, int k,
                            std::uint64_t seed, int phase, bool bias_correction = true);

/// Contextual recovery. Each round runs two independent passes over the action
/// batch, each observing fresh contexts, and Z = (1/MT)Σθ̃⁽¹⁾θ̃⁽²⁾ᵀ. A singular
/// realized Gram gets one ridge of 1e-8·trace/d; failing that,
/// SINGULAR_REALIZED_GRAM. Task m draws from (seed, "c-feat", m).
RecoveryResult c_feat_recover(ContextualEnvironment& env, const std::vector<int>& batch, int rounds, int k,
                              std::uint64_t seed);

}  // namespace mtbandit
