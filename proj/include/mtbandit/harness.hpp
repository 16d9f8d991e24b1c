#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtbandit/config_io.hpp"
#include "mtbandit/repbai.hpp"
#include "mtbandit/repbpi.hpp"

namespace mtbandit {

/// One CSV row. For linear runs S = A = 0 and max_subopt is the largest gap of
/// a returned arm; for contextual runs n = 0.
struct RunRecord {
  std::string algo;
  int d = 0, k = 0, m = 0, n = 0, s = 0, a = 0;
  double delta = 0, epsilon = 0, zeta = 0, gamma = 0;
  double scale_T0 = 0, scale_p = 0, scale_T = 0, scale_N = 0;
  std::uint64_t seed = 0;
  int run_id = 0;
  std::uint64_t samples_total = 0;
  bool success = false;
  double max_subopt = 0;
  double wallclock_ms = 0;
  std::vector<std::string> flags;
};

constexpr int kCsvSchema = 1;

/// schema,algo,d,k,M,n,S,A,delta,epsilon,zeta,gamma,scale_T0,scale_p,scale_T,
/// scale_N,seed,run_id,samples_total,success,max_subopt,wallclock_ms,flags
std::string csv_header();
std::string csv_row(const RunRecord& record);

/// Data rows, then per cell (algo and shape, in first-appearance order) a
/// "mean" row and, for cells with more than one run, a "std" row. In summary
/// rows run_id holds the tag, samples_total/max_subopt/wallclock_ms hold the
/// statistic and success holds the success rate.
void write_csv(std::ostream& out, const std::vector<RunRecord>& records);

/// Flags that make a run count as failed for exit-code purposes.
bool has_failure_flag(const std::vector<std::string>& flags);

enum class Problem { kRepBai, kRepBpi };

struct Experiment {
  Problem problem = Problem::kRepBai;
  InstanceSpec instance;
  RunConfig run;
  std::vector<std::string> algos;
  std::vector<int> ms;
  int replications = 1;
};

/// Top level: {seed, record_wallclock, experiments: [{problem, instance, run,
/// algos, M, replications}]}. Throws CONFIG_INVALID with the field path.
struct SweepConfig {
  std::uint64_t seed = 0;
  bool record_wallclock = false;
  std::vector<Experiment> experiments;
};

SweepConfig parse_sweep_config(const nlohmann::json& j);

/// hash(master, algo, M, run_id).
std::uint64_t cell_seed(std::uint64_t master, const std::string& algo, int m, int run_id);

/// Algorithms accepted by each problem.
const std::vector<std::string>& algorithms_for(Problem problem);

struct LinearRun {
  RunRecord record;
  BaiResult result;
};

struct ContextualRun {
  RunRecord record;
  BpiResult result;
};

/// Single runs on a fresh environment; config.seed seeds every stream.
/// Throws CONFIG_INVALID on an unknown algorithm.
LinearRun run_linear(const std::string& algo, const BanditInstance& instance, const RunConfig& config,
                     bool record_wallclock = false);
ContextualRun run_contextual(const std::string& algo, const ContextualInstance& instance, const RunConfig& config,
                             bool record_wallclock = false);

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

/// Runs every (experiment, algo, M, run_id) cell on `jobs` workers. Records
/// come back in cell order whatever the scheduling.
std::vector<RunRecord> run_sweep(const SweepConfig& config, int jobs = 1, const ProgressCallback& progress = {});

/// Per-phase rows of a RepBAI run.
void write_phase_log(std::ostream& out, const BaiResult& result);
/// Stage rows of a RepBPI run.
void write_stage_log(std::ostream& out, const BpiResult& result);

/// Ground-truth diagnostics for the structural assumptions.
struct InstanceDiagnostics {
  double task_diversity = 0;                // σ_min((1/M) Σ w wᵀ)
  std::optional<double> omega;              // min_m σ_min(A(λ*_m)) over reduced arms (linear)
  std::optional<double> min_gap;            // linear
  std::optional<double> nu;                 // contextual
  int tasks = 0;
};

InstanceDiagnostics diagnose(const BanditInstance& instance);
InstanceDiagnostics diagnose(const ContextualInstance& instance);

/// ω_m for a single task: λ*_m is the G-optimal design over items Bᵀx_i for
/// targets Bᵀ(x* − x)/gap, x ≠ x*; ω_m = σ_min(Σ_i λ*_i Bᵀx_i x_iᵀB).
double task_omega(const BanditInstance& instance, int task);

}  // namespace mtbandit
