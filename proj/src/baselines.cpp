#include "mtbandit/baselines.hpp"

#include <algorithm>
#include <limits>

namespace mtbandit {

BaiResult ind_rage(LinearEnvironment& env, const RunConfig& config) {
  config.validate();
  const BanditInstance& inst = env.instance();
  const int d = inst.dim();
  const int tasks = inst.num_tasks();
  const std::uint64_t start_pulls = env.pulls();
  const MatrixXd identity = MatrixXd::Identity(d, d);
  const double task_delta = config.delta / tasks;

  BaiResult result;
  result.algo = "indrage";
  result.config = config;

  CandidateSets candidates(static_cast<std::size_t>(tasks));
  for (auto& set : candidates)
    for (int i = 0; i < inst.num_arms(); ++i) set.push_back(i);
  std::vector<VectorXd> latest(static_cast<std::size_t>(tasks));

  bool finished = false;
  for (int t = 1; t <= config.max_phases && !finished; ++t) {
    PhaseLog log;
    log.phase = t;
    log.delta_t = phase_delta(task_delta, t);
    log.candidates_before = candidates;

    EliminationSettings settings;
    settings.phase = t;
    settings.delta_t = log.delta_t;
    settings.confidence_tasks = 1.0;
    settings.floor_dim = d;
    settings.zeta = config.zeta;
    settings.scale_N = config.scale_N;
    settings.scale_round = config.scale_round;
    EliminationOutcome elim = eli_low_rep(env, candidates, identity, settings, config.seed);
    if (elim.uncertified_roundings > 0 &&
        std::find(result.flags.begin(), result.flags.end(), "ROUNDING_UNCERTIFIED") == result.flags.end())
      result.flags.push_back("ROUNDING_UNCERTIFIED");
    if (elim.design_failures > 0 &&
        std::find(result.flags.begin(), result.flags.end(), "NO_CONVERGENCE") == result.flags.end())
      result.flags.push_back("NO_CONVERGENCE");

    candidates = elim.candidates;
    for (int m = 0; m < tasks; ++m)
      if (elim.estimates[static_cast<std::size_t>(m)].size() > 0)
        latest[static_cast<std::size_t>(m)] = elim.estimates[static_cast<std::size_t>(m)];
    log.elimination_samples = elim.samples_used;
    result.samples_total += elim.samples_used;
    log.cumulative_samples = result.samples_total;
    log.candidates_after = candidates;
    log.samples_per_task = std::move(elim.samples_per_task);
    log.rho_g = std::move(elim.rho_g);
    log.estimation_error = std::move(elim.estimation_error);
    result.phases.push_back(std::move(log));
    finished = std::all_of(candidates.begin(), candidates.end(), [](const auto& s) { return s.size() == 1; });
  }

  if (!finished) result.flags.push_back("PHASE_CAP_REACHED");
  const MatrixXd& arms = inst.arms().arms;
  for (int m = 0; m < tasks; ++m) {
    const auto& set = candidates[static_cast<std::size_t>(m)];
    int answer = set.front();
    const VectorXd& theta = latest[static_cast<std::size_t>(m)];
    if (set.size() > 1 && theta.size() > 0) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a : set) {
        if (arms.row(a).dot(theta) > best) {
          best = arms.row(a).dot(theta);
          answer = a;
        }
      }
    }
    result.answers.push_back(answer);
    result.correct.push_back(inst.mean_reward(m, answer) >= inst.mean_table().row(m).maxCoeff() - 1e-12);
  }
  result.success = finished && std::all_of(result.correct.begin(), result.correct.end(), [](bool b) { return b; });
  result.audited_pulls = env.pulls() - start_pulls;
  return result;
}

BpiResult ind_rf_linucb(ContextualEnvironment& env, const RunConfig& config) {
  config.validate();
  const ContextualInstance& inst = env.instance();
  const int d = inst.dim();
  const int tasks = inst.num_tasks();
  const std::uint64_t start_pulls = env.pulls();

  BpiResult result;
  result.algo = "indrflinucb";
  result.config = config;
  result.nu_hat = inst.context().assumption3_statistic();
  result.steps = estimation_steps(config.scale_N, d, config.gamma, inst.tasks().reward_norm_bound(), config.epsilon,
                                  config.delta / tasks);
  EstimationResult est = est_low_rep(env, result.steps, config.gamma, MatrixXd::Identity(d, d), config.seed);
  result.samples_total = est.samples_used;
  result.estimate = std::move(est.estimate);
  result.suboptimality = evaluate_policy_suboptimality(inst, result.estimate);
  result.max_suboptimality = *std::max_element(result.suboptimality.begin(), result.suboptimality.end());
  result.success = result.max_suboptimality <= config.epsilon;
  result.audited_pulls = env.pulls() - start_pulls;
  return result;
}

}  // namespace mtbandit
