#include "mtbandit/repbpi.hpp"

#include <algorithm>
#include <cmath>

#include "mtbandit/design.hpp"
#include "mtbandit/error.hpp"
#include "mtbandit/rounding.hpp"
#include "mtbandit/subspace.hpp"

namespace mtbandit {

namespace {

int ceil_int(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }

void add_flag(std::vector<std::string>& flags, const std::string& flag) {
  if (std::find(flags.begin(), flags.end(), flag) == flags.end()) flags.push_back(flag);
}

}  // namespace

ContextEstimate estimate_context_distribution(ContextualEnvironment& env, int t0, std::uint64_t seed) {
  const ContextualInstance& inst = env.instance();
  if (t0 < 1) throw Error(ErrorCode::kInvalidArgument, "T0 must be at least 1");
  RandomStream rng(seed, {hash_label("ctx-est")});
  ContextEstimate out;
  auto& dist = out.distribution;
  dist.counts.assign(static_cast<std::size_t>(inst.num_contexts()), 0);
  for (int tau = 0; tau < t0; ++tau) {
    const int s = env.observe_context(rng);
    const int a = static_cast<int>(rng.index(static_cast<std::size_t>(inst.num_actions())));
    env.act(tau % inst.num_tasks(), s, a, rng);
    ++dist.counts[static_cast<std::size_t>(s)];
  }
  dist.probabilities.resize(inst.num_contexts());
  for (int s = 0; s < inst.num_contexts(); ++s)
    dist.probabilities(s) = static_cast<double>(dist.counts[static_cast<std::size_t>(s)]) / t0;
  dist.moments = inst.context().action_moments(dist.probabilities);
  out.samples_used = static_cast<std::uint64_t>(t0);
  return out;
}

EstimationResult est_low_rep(ContextualEnvironment& env, int n, double gamma, const MatrixXd& basis,
                             std::uint64_t seed, const CovarianceObserver& observer) {
  const ContextualInstance& inst = env.instance();
  const ContextModel& ctx = inst.context();
  if (gamma < 1.0) throw Error(ErrorCode::kInvalidArgument, "gamma must be at least 1");
  if (basis.rows() != inst.dim()) throw Error(ErrorCode::kInvalidShape, "basis rows differ from feature dimension");
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "N must be non-negative");
  const int k = static_cast<int>(basis.cols());
  const int actions = inst.num_actions();

  // Reduced features B̂ᵀφ(s,a), one |A| × k table per context.
  std::vector<MatrixXd> reduced;
  for (const auto& table : ctx.features) reduced.push_back(table * basis);

  EstimationResult out;
  for (int m = 0; m < inst.num_tasks(); ++m) {
    RandomStream rng(seed, {hash_label("est"), static_cast<std::uint64_t>(m)});
    MatrixXd sigma = gamma * MatrixXd::Identity(k, k);
    VectorXd response = VectorXd::Zero(k);
    Eigen::LLT<MatrixXd> llt(sigma);
    for (int t = 1; t <= n; ++t) {
      const int s = env.observe_context(rng);
      const MatrixXd& z = reduced[static_cast<std::size_t>(s)];
      const MatrixXd solved = llt.solve(z.transpose());  // k × |A|
      int choice = 0;
      double widest = -1.0;
      for (int a = 0; a < actions; ++a) {
        const double width = z.row(a).dot(solved.col(a));
        if (width > widest) {
          widest = width;
          choice = a;
        }
      }
      const double r = env.act(m, s, choice, rng);
      sigma.noalias() += z.row(choice).transpose() * z.row(choice);
      response += z.row(choice).transpose() * r;
      llt.compute(sigma);
      if (observer) observer(m, t, sigma);
    }
    const VectorXd theta = basis * llt.solve(response);
    out.estimate.theta.push_back(theta);
    out.estimate.policy.push_back(greedy_policy(ctx, theta));
    out.estimate.sigma_spectrum.push_back(Eigen::SelfAdjointEigenSolver<MatrixXd>(sigma).eigenvalues());
    out.samples_used += static_cast<std::uint64_t>(n);
  }
  return out;
}

std::vector<int> greedy_policy(const ContextModel& context, const VectorXd& theta) {
  std::vector<int> policy;
  policy.reserve(static_cast<std::size_t>(context.contexts()));
  for (const auto& table : context.features) {
    const VectorXd values = table * theta;
    int best = 0;
    for (int a = 1; a < values.size(); ++a)
      if (values(a) > values(best)) best = a;
    policy.push_back(best);
  }
  return policy;
}

double evaluate_policy_suboptimality(const ContextualInstance& instance, int task, const std::vector<int>& policy) {
  if (static_cast<int>(policy.size()) != instance.num_contexts())
    throw Error(ErrorCode::kInvalidShape, "policy must cover every context");
  const VectorXd& dist = instance.context().distribution;
  double total = 0.0;
  for (int s = 0; s < instance.num_contexts(); ++s)
    total += dist(s) * (instance.best_value(task, s) - instance.mean_reward(task, s, policy[static_cast<std::size_t>(s)]));
  return std::max(0.0, total);
}

std::vector<double> evaluate_policy_suboptimality(const ContextualInstance& instance, const PolicyEstimate& estimate) {
  std::vector<double> out;
  for (int m = 0; m < instance.num_tasks(); ++m)
    out.push_back(evaluate_policy_suboptimality(instance, m, estimate.policy[static_cast<std::size_t>(m)]));
  return out;
}

int context_rounds(const RunConfig& c, double l_phi, int d, int actions) {
  const double lead = 1024.0 * std::pow(1.0 + c.zeta, 2) * std::pow(l_phi, 4) / (c.nu_floor * c.nu_floor);
  const double lg = std::log(20.0 * d * actions / c.delta);
  return std::max(1, ceil_int(c.scale_T0 * lead * lg * lg));
}

int contextual_rounds(const RunConfig& c, int k, double l_phi, double l_w, int tasks) {
  const double value = c.scale_T * std::pow(1.0 + c.zeta, 2) * std::pow(k, 4) * std::pow(l_phi, 4) * std::pow(l_w, 4) /
                       (tasks * c.nu_floor * c.nu_floor * c.epsilon * c.epsilon);
  return std::max(1, ceil_int(value));
}

int contextual_batch_size(const RunConfig& c, double l_phi, int d, int tasks, int rounds) {
  const double lead = 1024.0 * std::pow(1.0 + c.zeta, 2) * std::pow(l_phi, 4) / (c.nu_floor * c.nu_floor);
  const double lg = std::log(40.0 * d * tasks * rounds / c.delta);
  return std::max(1, ceil_int(c.scale_p * lead * lg * lg));
}

int estimation_steps(double scale_n, int k, double gamma, double l, double epsilon, double delta) {
  const double lg = std::log(gamma * k * l / (epsilon * delta));
  return std::max(1, ceil_int(scale_n * (k * k + gamma * k * l * l) / (epsilon * epsilon) * std::pow(lg, 4)));
}

BpiResult c_dou_exp_des(ContextualEnvironment& env, const RunConfig& config) {
  config.validate();
  const ContextualInstance& inst = env.instance();
  const ContextModel& ctx = inst.context();
  const int d = inst.dim();
  const int k = inst.rank();
  const int tasks = inst.num_tasks();
  const std::uint64_t start_pulls = env.pulls();

  BpiResult result;
  result.algo = "cdouexpdes";
  result.config = config;

  // Ground-truth diagnostic only; the formulas below use nu_floor.
  result.nu_hat = ctx.assumption3_statistic();
  if (!(result.nu_hat > 1e-12)) throw Error(ErrorCode::kAssumption3Violated, "no action mixture has full rank");

  result.t0 = context_rounds(config, ctx.norm_bound, d, inst.num_actions());
  const ContextEstimate est = estimate_context_distribution(env, result.t0, config.seed);
  result.samples_total += est.samples_used;

  const Design e_design = solve_e_optimal(est.distribution.moments);
  if (!e_design.converged) add_flag(result.flags, "NO_CONVERGENCE");
  result.rho_e = e_design.objective_value;

  result.rounds = contextual_rounds(config, k, ctx.norm_bound, inst.tasks().norm_bound, tasks);
  result.batch_size = contextual_batch_size(config, ctx.norm_bound, d, tasks, result.rounds);
  RoundingOptions options;
  options.zeta = config.zeta;
  options.scale_round = config.scale_round;
  options.require_certificate = false;
  const RoundedBatch batch =
      round_design(est.distribution.moments, e_design.weights, result.batch_size, RoundingCriterion::e(), options);
  if (!batch.certified) add_flag(result.flags, "ROUNDING_UNCERTIFIED");

  const RecoveryResult rec = c_feat_recover(env, batch.sequence, result.rounds, k, config.seed);
  result.samples_total += rec.samples_used;
  result.jitter_fallbacks = rec.jitter_fallbacks;
  if (rec.jitter_fallbacks > 0) add_flag(result.flags, "JITTER_FALLBACK");
  result.sin_theta = sin_theta(rec.estimate, inst.tasks().extractor);

  result.steps = estimation_steps(config.scale_N, k, config.gamma, inst.tasks().norm_bound, config.epsilon, config.delta);
  EstimationResult low = est_low_rep(env, result.steps, config.gamma, rec.estimate.basis, config.seed);
  result.samples_total += low.samples_used;
  result.estimate = std::move(low.estimate);

  result.suboptimality = evaluate_policy_suboptimality(inst, result.estimate);
  result.max_suboptimality = *std::max_element(result.suboptimality.begin(), result.suboptimality.end());
  result.success = result.max_suboptimality <= config.epsilon;
  result.audited_pulls = env.pulls() - start_pulls;
  return result;
}

}  // namespace mtbandit
