#include "mtbandit/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtbandit/error.hpp"
#include "mtbandit/linalg.hpp"

namespace mtbandit {

namespace {

void check_task(int task, int tasks) {
  if (task < 0 || task >= tasks) throw Error(ErrorCode::kUnknownTask, "task index " + std::to_string(task));
}

double max_row_norm(const MatrixXd& rows) { return rows.rowwise().norm().maxCoeff(); }

// Enumerates compositions of `total` into `parts` non-negative integers.
template <typename F>
void for_each_composition(int total, int parts, std::vector<int>& current, int index, F&& visit) {
  if (index == parts - 1) {
    current[static_cast<std::size_t>(index)] = total;
    visit(current);
    return;
  }
  for (int v = total; v >= 0; --v) {
    current[static_cast<std::size_t>(index)] = v;
    for_each_composition(total - v, parts, current, index + 1, visit);
  }
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

// ---------------------------------------------------------------- ArmSet

ArmSet ArmSet::from_rows(const MatrixXd& rows, std::optional<double> norm_bound) {
  if (rows.rows() == 0 || rows.cols() == 0) throw Error(ErrorCode::kInvalidShape, "empty arm set");
  if (rows.rows() < rows.cols()) throw Error(ErrorCode::kInvalidShape, "fewer arms than dimensions");
  if (linalg::numerical_rank(rows) < rows.cols()) throw Error(ErrorCode::kRankDeficient, "arms do not span R^d");
  const double largest = max_row_norm(rows);
  const double bound = norm_bound.value_or(largest);
  if (largest > bound * (1.0 + 1e-12)) throw Error(ErrorCode::kInvalidArgument, "arm norm exceeds L_x");
  return ArmSet{rows, bound};
}

std::optional<int> ArmSet::find(const VectorXd& x) const {
  if (x.size() != arms.cols()) return std::nullopt;
  for (int i = 0; i < size(); ++i)
    if ((arms.row(i).transpose() - x).cwiseAbs().maxCoeff() <= 1e-12) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------- TaskEnsemble

TaskEnsemble TaskEnsemble::create(const MatrixXd& extractor, const MatrixXd& predictions,
                                  std::optional<double> norm_bound) {
  const auto k = extractor.cols();
  if (k < 1 || extractor.rows() < k) throw Error(ErrorCode::kInvalidShape, "extractor must be d×k with d ≥ k ≥ 1");
  if (predictions.rows() != k || predictions.cols() < 1)
    throw Error(ErrorCode::kInvalidShape, "predictions must be k×M with M ≥ 1");
  if ((extractor.transpose() * extractor - MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10)
    throw Error(ErrorCode::kInvalidShape, "extractor columns are not orthonormal");
  const double largest = predictions.colwise().norm().maxCoeff();
  const double bound = norm_bound.value_or(largest);
  if (largest > bound * (1.0 + 1e-12)) throw Error(ErrorCode::kInvalidArgument, "prediction norm exceeds L_w");
  return TaskEnsemble{extractor, predictions, bound};
}

double TaskEnsemble::diversity() const {
  const MatrixXd moment = predictions * predictions.transpose() / static_cast<double>(tasks());
  return linalg::min_eigenvalue(moment);
}

double TaskEnsemble::reward_norm_bound() const { return rewards().colwise().norm().maxCoeff(); }

// ---------------------------------------------------------------- NoiseModel

double NoiseModel::sample(RandomStream& rng) const {
  switch (kind) {
    case NoiseKind::kStandardGaussian:
      return rng.normal();
    case NoiseKind::kScaledGaussian:
      return scale * rng.normal();
    case NoiseKind::kBoundedUniform:
      // Uniform on [-√3·s, √3·s] has variance s².
      return scale * std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
  }
  return 0.0;
}

void NoiseModel::validate() const {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::kInvalidArgument, "noise scale must be ≥ 0");
  if (scale == 0.0 && !test_mode) throw Error(ErrorCode::kInvalidArgument, "zero noise requires test mode");
  if (kind == NoiseKind::kStandardGaussian && scale != 1.0)
    throw Error(ErrorCode::kInvalidArgument, "standard Gaussian noise has unit scale");
}

// ---------------------------------------------------------------- BanditInstance

BanditInstance::BanditInstance(ArmSet arms, TaskEnsemble tasks, NoiseModel noise)
    : arms_(std::move(arms)), tasks_(std::move(tasks)), noise_(noise) {
  if (arms_.dim() != tasks_.dim()) throw Error(ErrorCode::kInvalidShape, "arm and task dimensions differ");
  noise_.validate();
  means_ = (arms_.arms * tasks_.rewards()).transpose();
}

int BanditInstance::best_arm(int task) const {
  check_task(task, num_tasks());
  Eigen::Index best = 0;
  means_.row(task).maxCoeff(&best);
  return static_cast<int>(best);
}

double BanditInstance::min_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (int m = 0; m < num_tasks(); ++m) {
    const double top = means_.row(m).maxCoeff();
    for (int i = 0; i < num_arms(); ++i) {
      const double g = top - means_(m, i);
      if (g > 1e-12) gap = std::min(gap, g);
    }
  }
  return gap;
}

double LinearEnvironment::pull(int task, int arm, RandomStream& rng) {
  check_task(task, instance_->num_tasks());
  if (arm < 0 || arm >= instance_->num_arms())
    throw Error(ErrorCode::kUnknownArm, "arm index " + std::to_string(arm));
  pulls_.fetch_add(1, std::memory_order_relaxed);
  return instance_->mean_reward(task, arm) + instance_->noise().sample(rng);
}

double LinearEnvironment::pull(int task, const VectorXd& x, RandomStream& rng) {
  const auto arm = instance_->arms().find(x);
  if (!arm) throw Error(ErrorCode::kUnknownArm, "vector is not in the arm set");
  return pull(task, *arm, rng);
}

// ---------------------------------------------------------------- ContextModel

ContextModel ContextModel::create(std::vector<MatrixXd> features, const VectorXd& distribution,
                                  std::optional<double> norm_bound) {
  if (features.empty()) throw Error(ErrorCode::kInvalidShape, "no contexts");
  const auto actions = features.front().rows();
  const auto dim = features.front().cols();
  if (actions < 1 || dim < 1) throw Error(ErrorCode::kInvalidShape, "empty feature table");
  double largest = 0.0;
  for (const auto& table : features) {
    if (table.rows() != actions || table.cols() != dim)
      throw Error(ErrorCode::kInvalidShape, "feature tables differ in shape");
    largest = std::max(largest, max_row_norm(table));
  }
  if (distribution.size() != static_cast<Eigen::Index>(features.size()))
    throw Error(ErrorCode::kInvalidShape, "distribution length differs from context count");
  if ((distribution.array() < 0.0).any() || std::abs(distribution.sum() - 1.0) > 1e-9)
    throw Error(ErrorCode::kInvalidArgument, "context distribution must be a probability vector");
  const double bound = norm_bound.value_or(largest);
  if (largest > bound * (1.0 + 1e-12)) throw Error(ErrorCode::kInvalidArgument, "feature norm exceeds L_phi");
  return ContextModel{std::move(features), distribution, bound};
}

std::vector<MatrixXd> ContextModel::action_moments(const VectorXd& dist) const {
  std::vector<MatrixXd> out(static_cast<std::size_t>(actions()), MatrixXd::Zero(dim(), dim()));
  for (int s = 0; s < contexts(); ++s) {
    if (dist(s) == 0.0) continue;
    const MatrixXd& table = features[static_cast<std::size_t>(s)];
    for (int a = 0; a < actions(); ++a)
      out[static_cast<std::size_t>(a)] += dist(s) * table.row(a).transpose() * table.row(a);
  }
  return out;
}

double ContextModel::assumption3_statistic(int max_points) const {
  const auto moments = action_moments(distribution);
  const int parts = actions();
  int resolution = 1;
  while (binomial(resolution + 1 + parts - 1, parts - 1) <= max_points && resolution < 64) ++resolution;

  auto sigma_at = [&](const VectorXd& lambda) {
    MatrixXd a = MatrixXd::Zero(dim(), dim());
    for (int i = 0; i < parts; ++i) a += lambda(i) * moments[static_cast<std::size_t>(i)];
    return linalg::min_eigenvalue(a);
  };

  double best = sigma_at(VectorXd::Constant(parts, 1.0 / parts));
  std::vector<int> counts(static_cast<std::size_t>(parts));
  for_each_composition(resolution, parts, counts, 0, [&](const std::vector<int>& c) {
    VectorXd lambda(parts);
    for (int i = 0; i < parts; ++i) lambda(i) = static_cast<double>(c[static_cast<std::size_t>(i)]) / resolution;
    best = std::max(best, sigma_at(lambda));
  });
  return best;
}

int ContextModel::sample_context(RandomStream& rng) const {
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (int s = 0; s < contexts(); ++s) {
    cumulative += distribution(s);
    if (u < cumulative) return s;
  }
  // Rounding slack: last context with positive mass.
  for (int s = contexts() - 1; s >= 0; --s)
    if (distribution(s) > 0.0) return s;
  return contexts() - 1;
}

// ---------------------------------------------------------------- ContextualInstance

ContextualInstance::ContextualInstance(ContextModel context, TaskEnsemble tasks, NoiseModel noise)
    : context_(std::move(context)), tasks_(std::move(tasks)), noise_(noise) {
  if (context_.dim() != tasks_.dim()) throw Error(ErrorCode::kInvalidShape, "feature and task dimensions differ");
  noise_.validate();
  const MatrixXd theta = tasks_.rewards();
  means_.reserve(static_cast<std::size_t>(tasks_.tasks()));
  for (int m = 0; m < tasks_.tasks(); ++m) {
    MatrixXd table(context_.contexts(), context_.actions());
    for (int s = 0; s < context_.contexts(); ++s)
      table.row(s) = (context_.features[static_cast<std::size_t>(s)] * theta.col(m)).transpose();
    means_.push_back(std::move(table));
  }
}

double ContextualInstance::best_value(int task, int s) const {
  return means_[static_cast<std::size_t>(task)].row(s).maxCoeff();
}

int ContextualEnvironment::observe_context(RandomStream& rng) const {
  return instance_->context().sample_context(rng);
}

double ContextualEnvironment::act(int task, int s, int a, RandomStream& rng) {
  check_task(task, instance_->num_tasks());
  if (a < 0 || a >= instance_->num_actions())
    throw Error(ErrorCode::kUnknownAction, "action index " + std::to_string(a));
  if (s < 0 || s >= instance_->num_contexts())
    throw Error(ErrorCode::kInvalidArgument, "context index " + std::to_string(s));
  pulls_.fetch_add(1, std::memory_order_relaxed);
  return instance_->mean_reward(task, s, a) + instance_->noise().sample(rng);
}

std::pair<int, double> ContextualEnvironment::step(int task, int a, RandomStream& rng) {
  check_task(task, instance_->num_tasks());
  if (a < 0 || a >= instance_->num_actions())
    throw Error(ErrorCode::kUnknownAction, "action index " + std::to_string(a));
  const int s = observe_context(rng);
  return {s, act(task, s, a, rng)};
}

// ---------------------------------------------------------------- RunConfig

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kConfigInvalid, field + ": " + why);
  };
  if (!(delta > 0.0 && delta < 1.0)) fail("delta", "must lie in (0,1)");
  if (!(epsilon > 0.0)) fail("epsilon", "must be positive");
  if (!(zeta > 0.0 && zeta < 1.0)) fail("zeta", "must lie in (0,1)");
  if (!(gamma >= 1.0)) fail("gamma", "must be at least 1");
  const std::pair<const char*, double> scales[] = {{"scale_T", scale_T},     {"scale_p", scale_p},
                                                   {"scale_N", scale_N},     {"scale_T0", scale_T0},
                                                   {"scale_round", scale_round}, {"omega_floor", omega_floor},
                                                   {"nu_floor", nu_floor}};
  for (const auto& [name, value] : scales)
    if (!(value > 0.0) || !std::isfinite(value)) fail(name, "must be positive");
  if (max_phases < 1) fail("max_phases", "must be at least 1");
  if (parallelism < 1) fail("parallelism", "must be at least 1");
}

// ---------------------------------------------------------------- canonical instances

TaskEnsemble make_canonical_tasks(int d, int k, int m) {
  if (k < 1 || d <= k) throw Error(ErrorCode::kInvalidShape, "canonical instance needs d > k ≥ 1");
  if (m < 1 || m % k != 0) throw Error(ErrorCode::kInvalidShape, "canonical instance needs k | M");
  MatrixXd b = MatrixXd::Zero(d, k);
  b.topRows(k).setIdentity();
  MatrixXd w = MatrixXd::Zero(k, m);
  const int group = m / k;
  for (int t = 0; t < m; ++t) w(t / group, t) = 1.0;
  return TaskEnsemble::create(b, w);
}

BanditInstance make_canonical_instance(int d, int k, int m, NoiseModel noise) {
  TaskEnsemble tasks = make_canonical_tasks(d, k, m);
  return BanditInstance(ArmSet::from_rows(MatrixXd::Identity(d, d)), std::move(tasks), noise);
}

ContextualInstance make_canonical_contextual_instance(int d, int k, int m, int contexts, int actions,
                                                      NoiseModel noise) {
  TaskEnsemble tasks = make_canonical_tasks(d, k, m);
  if (contexts < 1 || actions < 1) throw Error(ErrorCode::kInvalidShape, "need at least one context and action");
  std::vector<MatrixXd> features;
  for (int s = 0; s < contexts; ++s) {
    MatrixXd table = MatrixXd::Zero(actions, d);
    for (int a = 0; a < actions; ++a) table(a, (a + s) % d) = 1.0;
    features.push_back(std::move(table));
  }
  ContextModel model = ContextModel::create(std::move(features), VectorXd::Constant(contexts, 1.0 / contexts));
  return ContextualInstance(std::move(model), std::move(tasks), noise);
}

}  // namespace mtbandit
