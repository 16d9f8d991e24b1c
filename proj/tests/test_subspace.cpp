#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mtbandit/design.hpp"
#include "mtbandit/error.hpp"
#include "mtbandit/rounding.hpp"
#include "mtbandit/subspace.hpp"

using namespace mtbandit;

namespace {

MatrixXd task_second_moment(const TaskEnsemble& tasks) {
  const MatrixXd theta = tasks.rewards();
  return theta * theta.transpose() / tasks.tasks();
}

std::vector<int> each_once(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

MatrixXd random_orthogonal(int k, RandomStream& rng) {
  MatrixXd g(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) g(i, j) = rng.normal();
  return Eigen::HouseholderQR<MatrixXd>(g).householderQ();
}

}  // namespace

TEST_CASE("noiseless recovery without correction is exact") {
  const BanditInstance inst = make_canonical_instance(5, 2, 4, NoiseModel::silent());
  LinearEnvironment env(inst);
  const RecoveryResult r = feat_recover(env, each_once(5), 3, 2, 7, 1, false);
  CHECK((r.moment.z - task_second_moment(inst.tasks())).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sin_theta(r.estimate, inst.tasks().extractor) < 1e-12);
  CHECK(r.samples_used == 4u * 3u * 5u);
  CHECK(env.pulls() == r.samples_used);
  CHECK_FALSE(r.moment.bias_corrected);
}

TEST_CASE("bias correction subtracts the inverse batch Gram") {
  const BanditInstance inst = make_canonical_instance(3, 1, 2, NoiseModel::silent());
  LinearEnvironment env(inst);
  const std::vector<int> batch{0, 0, 1, 2};
  const RecoveryResult r = feat_recover(env, batch, 1, 1, 1, 1, true);
  MatrixXd gram = MatrixXd::Zero(3, 3);
  gram.diagonal() << 2, 1, 1;
  const MatrixXd expected = task_second_moment(inst.tasks()) - gram.inverse();
  CHECK((r.moment.z - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.moment.bias_corrected);
}

TEST_CASE("rank-deficient batch is rejected") {
  const BanditInstance inst = make_canonical_instance(3, 1, 2);
  LinearEnvironment env(inst);
  try {
    feat_recover(env, {0, 1, 1}, 1, 1, 0, 1);
    FAIL("expected SINGULAR_BATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingularBatch);
  }
}

TEST_CASE("recovery replays identically for a fixed seed") {
  const BanditInstance inst = make_canonical_instance(5, 2, 6);
  LinearEnvironment a(inst), b(inst);
  const RecoveryResult ra = feat_recover(a, each_once(5), 4, 2, 99, 2);
  const RecoveryResult rb = feat_recover(b, each_once(5), 4, 2, 99, 2);
  CHECK(ra.moment.z == rb.moment.z);
  const RecoveryResult rc = feat_recover(a, each_once(5), 4, 2, 100, 2);
  CHECK(ra.moment.z != rc.moment.z);
}

TEST_CASE("sin theta closed forms") {
  MatrixXd e1(2, 1), e2(2, 1);
  e1 << 1, 0;
  e2 << 0, 1;
  CHECK(sin_theta(e1, e1) == doctest::Approx(0.0));
  CHECK(sin_theta(e2, e1) == doctest::Approx(1.0));
  MatrixXd rotated(2, 1);
  rotated << std::cos(0.3), std::sin(0.3);
  CHECK(sin_theta(rotated, e1) == doctest::Approx(std::sin(0.3)).epsilon(1e-12));
  CHECK(std::sin(0.3) == doctest::Approx(0.29552).epsilon(1e-4));
  CHECK_THROWS_AS(sin_theta(MatrixXd::Identity(3, 1), e1), Error);
}

TEST_CASE("sin theta is invariant to rotations of either basis") {
  RandomStream rng(5, {hash_label("rot")});
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd a(6, 3), b(6, 3);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 3; ++j) {
        a(i, j) = rng.normal();
        b(i, j) = rng.normal();
      }
    const MatrixXd qa = Eigen::HouseholderQR<MatrixXd>(a).householderQ() * MatrixXd::Identity(6, 3);
    const MatrixXd qb = Eigen::HouseholderQR<MatrixXd>(b).householderQ() * MatrixXd::Identity(6, 3);
    const double base = sin_theta(qa, qb);
    CHECK(sin_theta(qa * random_orthogonal(3, rng), qb) == doctest::Approx(base).epsilon(1e-10));
    CHECK(sin_theta(qa, qb * random_orthogonal(3, rng)) == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("top-k subspace is orthonormal, sorted and sign-normalized") {
  RandomStream rng(3, {hash_label("svd")});
  MatrixXd z(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) z(i, j) = rng.normal();
  const SubspaceEstimate s = top_k_subspace(z, 2);
  CHECK((s.basis.transpose() * s.basis - MatrixXd::Identity(2, 2)).norm() < 1e-10);
  for (int i = 1; i < 5; ++i) CHECK(s.singular_values(i - 1) >= s.singular_values(i));
  CHECK(s.spectral_gap == doctest::Approx(s.singular_values(1) - s.singular_values(2)));
  for (int c = 0; c < 2; ++c) {
    int first = 0;
    while (std::abs(s.basis(first, c)) <= 1e-12) ++first;
    CHECK(s.basis(first, c) > 0);
  }
}

TEST_CASE("rounded E-optimal batches satisfy the pseudo-inverse bound") {
  RandomStream rng(11, {hash_label("pinv")});
  const double zeta = 0.5;
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 3 + trial % 3;
    MatrixXd arms(2 * d, d);
    for (int i = 0; i < arms.rows(); ++i)
      for (int j = 0; j < d; ++j) arms(i, j) = rng.normal();
    const Design e = solve_e_optimal(arms);
    RoundingOptions options;
    options.zeta = zeta;
    options.scale_round = 0.05;
    const int p = minimum_batch_size(d, zeta, options.scale_round) + 7 * trial;
    const RoundedBatch batch = round_design(arms, e.weights, p, RoundingCriterion::e(), options);
    CHECK(batch_pinv_norm(arms, batch.sequence) <= std::sqrt((1 + zeta) * e.objective_value / p) * (1 + 1e-9));
  }
}

TEST_CASE("contextual recovery with one context and no noise is exact") {
  const ContextualInstance inst = make_canonical_contextual_instance(5, 2, 4, 1, 5, NoiseModel::silent());
  ContextualEnvironment env(inst);
  const RecoveryResult r = c_feat_recover(env, each_once(5), 2, 2, 3);
  CHECK((r.moment.z - task_second_moment(inst.tasks())).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.samples_used == 2u * 4u * 2u * 5u);
  CHECK(env.pulls() == r.samples_used);
  CHECK(r.jitter_fallbacks == 0);
  CHECK_FALSE(r.moment.bias_corrected);
}

TEST_CASE("contextual moment is not symmetric under noise") {
  const ContextualInstance inst = make_canonical_contextual_instance(5, 2, 4, 1, 5);
  ContextualEnvironment env(inst);
  const RecoveryResult r = c_feat_recover(env, each_once(5), 1, 2, 8);
  CHECK((r.moment.z - r.moment.z.transpose()).norm() > 0.01);
}

TEST_CASE("spectral gap is positive at the desk recovery scale") {
  const BanditInstance inst = make_canonical_instance(5, 2, 50);
  const Design e = solve_e_optimal(inst.arms().arms);
  RoundingOptions options;
  options.scale_round = 0.001;
  const RoundedBatch batch = round_design(inst.arms().arms, e.weights, 90, RoundingCriterion::e(), options);
  int positive = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    LinearEnvironment env(inst);
    const RecoveryResult r = feat_recover(env, batch.sequence, 107, 2, seed, 1);
    if (r.estimate.spectral_gap > 0) ++positive;
  }
  CHECK(positive >= 19);
}
