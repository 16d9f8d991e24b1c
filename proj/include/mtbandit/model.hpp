#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mtbandit/random.hpp"

namespace mtbandit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Finite arm set; row i of `arms` is x_i.
struct ArmSet {
  MatrixXd arms;
  double norm_bound = 0.0;  // L_x

  /// Validates n ≥ d, full column rank and norms. The bound defaults to the max
  /// arm norm. Throws INVALID_SHAPE / RANK_DEFICIENT / INVALID_ARGUMENT.
  static ArmSet from_rows(const MatrixXd& rows, std::optional<double> norm_bound = std::nullopt);

  int size() const { return static_cast<int>(arms.rows()); }
  int dim() const { return static_cast<int>(arms.cols()); }
  VectorXd arm(int i) const { return arms.row(i).transpose(); }
  /// Index of an arm equal to x (to 1e-12), if any.
  std::optional<int> find(const VectorXd& x) const;
};

/// Hidden truth shared by all tasks: θ_m = B w_m.
struct TaskEnsemble {
  MatrixXd extractor;    // B, d × k, orthonormal columns
  MatrixXd predictions;  // W, k × M
  double norm_bound = 0.0;  // L_w

  /// Throws INVALID_SHAPE when BᵀB ≠ I (1e-10) or shapes disagree, and
  /// INVALID_ARGUMENT when some ‖w_m‖ exceeds the bound.
  static TaskEnsemble create(const MatrixXd& extractor, const MatrixXd& predictions,
                             std::optional<double> norm_bound = std::nullopt);

  int dim() const { return static_cast<int>(extractor.rows()); }
  int rank() const { return static_cast<int>(extractor.cols()); }
  int tasks() const { return static_cast<int>(predictions.cols()); }
  VectorXd reward(int m) const { return extractor * predictions.col(m); }
  MatrixXd rewards() const { return extractor * predictions; }  // d × M
  /// σ_min((1/M) Σ_m w_m w_mᵀ).
  double diversity() const;
  /// max_m ‖θ_m‖.
  double reward_norm_bound() const;
};

enum class NoiseKind { kStandardGaussian, kScaledGaussian, kBoundedUniform };

/// Zero-mean noise with variance scale². Every sample consumes one draw.
struct NoiseModel {
  NoiseKind kind = NoiseKind::kStandardGaussian;
  double scale = 1.0;
  bool test_mode = false;  // permits scale = 0

  static NoiseModel standard() { return {}; }
  static NoiseModel gaussian(double scale, bool test_mode = false) {
    return {NoiseKind::kScaledGaussian, scale, test_mode};
  }
  static NoiseModel bounded_uniform(double scale, bool test_mode = false) {
    return {NoiseKind::kBoundedUniform, scale, test_mode};
  }
  /// Zero noise; test-only.
  static NoiseModel silent() { return {NoiseKind::kScaledGaussian, 0.0, true}; }

  double variance() const { return scale * scale; }
  double sample(RandomStream& rng) const;
  void validate() const;
};

class BanditInstance {
 public:
  BanditInstance(ArmSet arms, TaskEnsemble tasks, NoiseModel noise = NoiseModel::standard());

  const ArmSet& arms() const { return arms_; }
  const TaskEnsemble& tasks() const { return tasks_; }
  const NoiseModel& noise() const { return noise_; }
  int num_arms() const { return arms_.size(); }
  int dim() const { return arms_.dim(); }
  int rank() const { return tasks_.rank(); }
  int num_tasks() const { return tasks_.tasks(); }

  double mean_reward(int task, int arm) const { return means_(task, arm); }
  const MatrixXd& mean_table() const { return means_; }  // M × n
  /// Lowest-index maximizer of xᵀθ_m.
  int best_arm(int task) const;
  /// Smallest positive gap between a task's best arm and any other arm.
  double min_gap() const;

 private:
  ArmSet arms_;
  TaskEnsemble tasks_;
  NoiseModel noise_;
  MatrixXd means_;
};

/// Pull oracle over an immutable instance with an audited pull counter.
class LinearEnvironment {
 public:
  explicit LinearEnvironment(const BanditInstance& instance) : instance_(&instance) {}

  /// Returns x_armᵀθ_task + η. Throws UNKNOWN_TASK / UNKNOWN_ARM.
  double pull(int task, int arm, RandomStream& rng);
  double pull(int task, const VectorXd& x, RandomStream& rng);

  std::uint64_t pulls() const { return pulls_.load(); }
  const BanditInstance& instance() const { return *instance_; }

 private:
  const BanditInstance* instance_;
  std::atomic<std::uint64_t> pulls_{0};
};

/// Finite context space with per-context feature tables.
struct ContextModel {
  std::vector<MatrixXd> features;  // one |A| × d table per context, row a = φ(s,a)
  VectorXd distribution;           // D over contexts
  double norm_bound = 0.0;         // L_φ

  static ContextModel create(std::vector<MatrixXd> features, const VectorXd& distribution,
                             std::optional<double> norm_bound = std::nullopt);

  int contexts() const { return static_cast<int>(features.size()); }
  int actions() const { return static_cast<int>(features.front().rows()); }
  int dim() const { return static_cast<int>(features.front().cols()); }
  VectorXd feature(int s, int a) const { return features[static_cast<std::size_t>(s)].row(a).transpose(); }

  /// E_{s∼dist}[φ(s,a)φ(s,a)ᵀ] for every action.
  std::vector<MatrixXd> action_moments(const VectorXd& dist) const;
  /// max over a simplex grid of σ_min(Σ_a λ_a E_D[φφᵀ]); the grid has at most
  /// `max_points` points and always includes the uniform mixture.
  double assumption3_statistic(int max_points = 20000) const;
  /// Draws s ∼ D with one uniform draw.
  int sample_context(RandomStream& rng) const;
};

class ContextualInstance {
 public:
  ContextualInstance(ContextModel context, TaskEnsemble tasks, NoiseModel noise = NoiseModel::standard());

  const ContextModel& context() const { return context_; }
  const TaskEnsemble& tasks() const { return tasks_; }
  const NoiseModel& noise() const { return noise_; }
  int dim() const { return context_.dim(); }
  int rank() const { return tasks_.rank(); }
  int num_tasks() const { return tasks_.tasks(); }
  int num_contexts() const { return context_.contexts(); }
  int num_actions() const { return context_.actions(); }

  /// φ(s,a)ᵀθ_m.
  double mean_reward(int task, int s, int a) const {
    return means_[static_cast<std::size_t>(task)](s, a);
  }
  double best_value(int task, int s) const;

 private:
  ContextModel context_;
  TaskEnsemble tasks_;
  NoiseModel noise_;
  std::vector<MatrixXd> means_;  // per task, |S| × |A|
};

/// Contextual oracle supporting the observe-then-act protocol.
class ContextualEnvironment {
 public:
  explicit ContextualEnvironment(const ContextualInstance& instance) : instance_(&instance) {}

  /// Draws s ∼ D. Does not count as a pull.
  int observe_context(RandomStream& rng) const;
  /// Reward for action a in the observed context s. Throws UNKNOWN_TASK / UNKNOWN_ACTION.
  double act(int task, int s, int a, RandomStream& rng);
  /// observe_context followed by act.
  std::pair<int, double> step(int task, int a, RandomStream& rng);

  std::uint64_t pulls() const { return pulls_.load(); }
  const ContextualInstance& instance() const { return *instance_; }

 private:
  const ContextualInstance* instance_;
  std::atomic<std::uint64_t> pulls_{0};
};

/// Algorithm parameters. Batch sizes are ⌈scale_* · formula⌉ with the formulas'
/// absolute constants set to one.
struct RunConfig {
  double delta = 0.005;
  double epsilon = 0.1;
  double zeta = 0.1;
  double gamma = 1.0;
  double scale_T = 1.0;
  double scale_p = 1.0;
  double scale_N = 1.0;
  double scale_T0 = 1.0;
  double scale_round = 1.0;
  double omega_floor = 0.1;
  double nu_floor = 0.1;
  int max_phases = 20;
  std::uint64_t seed = 0;
  int parallelism = 1;
  bool bias_correction = true;

  /// Throws CONFIG_INVALID naming the offending field.
  void validate() const;
};

/// Arms = canonical basis of R^d, B = [I_k; 0], w in k equal groups of e_i.
/// Throws INVALID_SHAPE unless k | M and d > k ≥ 1.
BanditInstance make_canonical_instance(int d, int k, int m, NoiseModel noise = NoiseModel::standard());

/// Contextual analogue: |S| contexts under the uniform distribution, and for
/// each context the action features are the canonical basis in cyclic order,
/// φ(s,a) = e_{(a+s) mod d}.
ContextualInstance make_canonical_contextual_instance(int d, int k, int m, int contexts, int actions,
                                                      NoiseModel noise = NoiseModel::standard());

/// The task ensemble used by both canonical instances.
TaskEnsemble make_canonical_tasks(int d, int k, int m);

}  // namespace mtbandit
