#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtbandit/model.hpp"

namespace mtbandit {

struct EmpiricalContextDistribution {
  std::vector<int> counts;            // per context, sums to T0
  VectorXd probabilities;             // D̂
  std::vector<MatrixXd> moments;      // per action, E_{s∼D̂}[φφᵀ]
};

struct ContextEstimate {
  EmpiricalContextDistribution distribution;
  std::uint64_t samples_used = 0;
};

/// Observes T0 contexts, pairing each with a uniformly random action that is
/// pulled (reward discarded) on task τ mod M. Draws from (seed, "ctx-est").
ContextEstimate estimate_context_distribution(ContextualEnvironment& env, int t0, std::uint64_t seed);

/// Called after each ridge update with (task, t, Σ_{m,t}).
using CovarianceObserver = std::function<void(int, int, const MatrixXd&)>;

struct PolicyEstimate {
  std::vector<VectorXd> theta;          // θ̂_{m,N}
  std::vector<std::vector<int>> policy; // π̂_m(s)
  std::vector<VectorXd> sigma_spectrum; // eigenvalues of the final Σ_{m,N}
};

struct EstimationResult {
  PolicyEstimate estimate;
  std::uint64_t samples_used = 0;
};

/// Reward-free uncertainty sampling in the span of `basis`: for t = 1..N,
/// observe s, choose argmax_a ‖B̂ᵀφ(s,a)‖_{Σ⁻¹} (lowest index on ties), pull,
/// update Σ = γI + Σzzᵀ and the ridge estimate. Task m draws from
/// (seed, "est", m).
EstimationResult est_low_rep(ContextualEnvironment& env, int n, double gamma, const MatrixXd& basis,
                             std::uint64_t seed, const CovarianceObserver& observer = {});

/// argmax_a φ(s,a)ᵀθ per context, lowest index on ties.
std::vector<int> greedy_policy(const ContextModel& context, const VectorXd& theta);

/// E_{s∼D}[max_a φᵀθ_m − φ(s,π(s))ᵀθ_m] under the true D and θ_m.
double evaluate_policy_suboptimality(const ContextualInstance& instance, int task, const std::vector<int>& policy);
std::vector<double> evaluate_policy_suboptimality(const ContextualInstance& instance, const PolicyEstimate& estimate);

/// ⌈scale_T0·32²(1+ζ)²L_φ⁴/ν²·log²(20d|A|/δ)⌉.
int context_rounds(const RunConfig& config, double l_phi, int d, int actions);
/// max{1, ⌈scale_T·(1+ζ)²k⁴L_φ⁴L_w⁴/(Mν²ε²)⌉}.
int contextual_rounds(const RunConfig& config, int k, double l_phi, double l_w, int tasks);
/// ⌈scale_p·32²(1+ζ)²L_φ⁴/ν²·log²(40dMT/δ)⌉.
int contextual_batch_size(const RunConfig& config, double l_phi, int d, int tasks, int rounds);
/// ⌈scale_N·(k² + γkL²)/ε²·log⁴(γkL/(εδ'))⌉.
int estimation_steps(double scale_n, int k, double gamma, double l, double epsilon, double delta);

struct BpiResult {
  std::string algo;
  PolicyEstimate estimate;
  std::vector<double> suboptimality;
  double max_suboptimality = 0.0;
  bool success = false;
  std::uint64_t samples_total = 0;
  std::uint64_t audited_pulls = 0;
  RunConfig config;
  std::vector<std::string> flags;
  int t0 = 0;
  int rounds = 0;      // T
  int batch_size = 0;  // p
  int steps = 0;       // N
  double rho_e = 0.0;
  double nu_hat = 0.0;
  std::optional<double> sin_theta;
  int jitter_fallbacks = 0;
};

/// Contextual double experimental design. Throws ASSUMPTION3_VIOLATED.
BpiResult c_dou_exp_des(ContextualEnvironment& env, const RunConfig& config);

}  // namespace mtbandit
