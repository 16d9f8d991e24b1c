#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtbandit/model.hpp"

namespace mtbandit {

using CandidateSets = std::vector<std::vector<int>>;  // per task, sorted arm indices

/// Knobs of one elimination phase. `confidence_tasks` is the M inside
/// log(4n²M/δ_t); `floor_dim` is the dimension in the 180·k/ζ² floor.
struct EliminationSettings {
  int phase = 1;
  double delta_t = 0.0;
  double confidence_tasks = 1.0;
  int floor_dim = 1;
  double zeta = 0.1;
  double scale_N = 1.0;
  double scale_round = 1.0;
};

struct EliminationOutcome {
  CandidateSets candidates;
  std::uint64_t samples_used = 0;
  std::vector<std::uint64_t> samples_per_task;  // N_{t,m}; 0 for pass-through singletons
  std::vector<double> rho_g;                    // 0 for pass-through singletons
  std::vector<VectorXd> estimates;              // θ̂_m; empty for pass-through singletons
  std::vector<double> estimation_error;         // max_y |yᵀ(θ̂−θ_m)|; ground truth, diagnostics only
  int uncertified_roundings = 0;
  int design_failures = 0;                      // G solves that missed the certificate
};

/// One phase of low-dimensional elimination for every task. Tasks with a
/// single candidate are passed through unsampled. Task m draws from the
/// stream (seed, "eli", phase, m). Throws SINGULAR_REDUCED_GRAM.
EliminationOutcome eli_low_rep(LinearEnvironment& env, const CandidateSets& candidates, const MatrixXd& basis,
                               const EliminationSettings& settings, std::uint64_t seed);

/// ⌈max{scale_N·32(1+ζ)2^{2t}ρ^G·log(4n²M/δ_t), scale_round·180k/ζ²}⌉.
std::uint64_t elimination_budget(double rho_g, int n, const EliminationSettings& settings);

/// δ_t = δ / (2t²).
double phase_delta(double delta, int phase);

/// ⌈scale_T·(1+ζ)³(ρ^E)²k⁴L_x⁴L_w⁴/M · max{2^{2t}, L_x⁴/ω²}⌉, at least 1.
int phase_rounds(const RunConfig& config, double rho_e, int k, double lx, double lw, int tasks, int phase);

struct PhaseLog {
  int phase = 0;
  int rounds = 0;  // T_t; 0 for the baseline
  double delta_t = 0.0;
  std::uint64_t representation_samples = 0;
  std::uint64_t elimination_samples = 0;
  std::uint64_t cumulative_samples = 0;
  std::optional<double> sin_theta;
  std::optional<double> spectral_gap;
  CandidateSets candidates_before;
  CandidateSets candidates_after;
  std::vector<std::uint64_t> samples_per_task;
  std::vector<double> rho_g;
  std::vector<double> estimation_error;
};

struct BaiResult {
  std::string algo;
  std::vector<int> answers;
  std::vector<bool> correct;
  bool success = false;
  std::uint64_t samples_total = 0;
  std::uint64_t audited_pulls = 0;  // environment counter delta over the run
  std::vector<PhaseLog> phases;
  RunConfig config;
  std::vector<std::string> flags;
  int batch_size = 0;  // p
  double rho_e = 0.0;
};

/// Double experimental design for multi-task best-arm identification.
BaiResult dou_exp_des(LinearEnvironment& env, const RunConfig& config);

}  // namespace mtbandit
