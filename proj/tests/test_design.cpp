#include <random>

#include "doctest.h"
#include "mtbandit/design.hpp"
#include "mtbandit/error.hpp"

using namespace mtbandit;

namespace {

MatrixXd random_rows(std::mt19937_64& gen, int n, int dim) {
  std::normal_distribution<double> normal;
  MatrixXd z(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) z(i, j) = normal(gen);
  return z;
}

}  // namespace

TEST_CASE("E-optimal on canonical bases is uniform with value d") {
  for (int d : {2, 3, 5}) {
    const Design design = solve_e_optimal(MatrixXd::Identity(d, d));
    CHECK(design.converged);
    CHECK(design.objective_value == doctest::Approx(d).epsilon(1e-4));
    for (int i = 0; i < d; ++i) CHECK(design.weights(i) == doctest::Approx(1.0 / d).epsilon(1e-3));
  }
}

TEST_CASE("E-optimal on scaled arms") {
  const MatrixXd arms = 2.0 * MatrixXd::Identity(2, 2);
  const Design design = solve_e_optimal(arms);
  CHECK(design.objective_value == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("E-optimal matches a simplex grid search") {
  MatrixXd arms(3, 2);
  arms << 1, 0, 0, 1, 1, 1;
  const Design design = solve_e_optimal(arms);
  double best = 1e300;
  const int steps = 1000;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      VectorXd w(3);
      w << i, j, steps - i - j;
      w /= steps;
      const MatrixXd a = design_covariance(w, arms);
      const double sigma = Eigen::SelfAdjointEigenSolver<MatrixXd>(a).eigenvalues()(0);
      if (sigma > 0) best = std::min(best, 1.0 / sigma);
    }
  }
  CHECK(design.objective_value <= best + 1e-4);
  CHECK(design.objective_value >= best - 1e-2);
}

TEST_CASE("G-optimal reaches the Kiefer-Wolfowitz value") {
  for (int k : {1, 2, 3, 5}) {
    const MatrixXd eye = MatrixXd::Identity(k, k);
    const Design design = solve_g_optimal(eye, eye);
    CHECK(design.converged);
    CHECK(design.objective_value == doctest::Approx(k).epsilon(1e-4));
  }
}

TEST_CASE("G-optimal with a single difference target") {
  const MatrixXd items = MatrixXd::Identity(2, 2);
  MatrixXd targets(1, 2);
  targets << 1, -1;
  const Design design = solve_g_optimal(items, targets);
  CHECK(design.objective_value == doctest::Approx(4.0).epsilon(1e-4));
  CHECK(design.weights(0) == doctest::Approx(0.5).epsilon(1e-2));
}

TEST_CASE("G-optimal single item and target") {
  MatrixXd z(1, 1);
  z << 3.0;
  const Design design = solve_g_optimal(z, z);
  CHECK(design.objective_value == doctest::Approx(1.0));
}

TEST_CASE("G-optimal errors") {
  MatrixXd items(2, 2);
  items << 1, 0, 2, 0;
  CHECK_THROWS_AS(solve_g_optimal(items, items), Error);
  try {
    solve_g_optimal(MatrixXd::Identity(2, 2), MatrixXd(0, 2));
    FAIL("expected EMPTY_TARGETS");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyTargets);
  }
  try {
    solve_g_optimal(items, items);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRankDeficient);
  }
  try {
    solve_e_optimal(items);
    FAIL("expected RANK_DEFICIENT");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRankDeficient);
  }
}

TEST_CASE("kw_gap detects optimal and perturbed designs") {
  const MatrixXd eye = MatrixXd::Identity(3, 3);
  VectorXd uniform = VectorXd::Constant(3, 1.0 / 3.0);
  CHECK(kw_gap(uniform, eye, eye) == doctest::Approx(0.0).epsilon(1e-6));
  VectorXd perturbed = uniform;
  perturbed(0) += 0.1;
  perturbed /= perturbed.sum();
  CHECK(kw_gap(perturbed, eye, eye) > 1e-3);
  VectorXd singular = VectorXd::Zero(3);
  singular(0) = 1.0;
  CHECK_THROWS_AS(kw_gap(singular, eye, eye), Error);
}

TEST_CASE("solver output certifies on random instances") {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> dim_dist(2, 6);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = dim_dist(gen);
    const int n = dim + static_cast<int>(gen() % (dim + 3));
    const MatrixXd z = random_rows(gen, n, dim);
    const MatrixXd y = trial % 2 == 0 ? MatrixXd(z) : difference_targets(z);
    const Design design = solve_g_optimal(z, y);
    const double gap = kw_gap(design, z, y);
    if (gap > 1e-4 || !design.converged) {
      ++failures;
      MESSAGE("trial " << trial << " dim " << dim << " n " << n << " gap " << gap << " solver gap "
                       << design.certificate_gap);
    }
    for (std::size_t i = 1; i < design.trace.size(); ++i) CHECK(design.trace[i] <= design.trace[i - 1] + 1e-12);
  }
  CHECK(failures == 0);
}

TEST_CASE("KW bound for targets equal to items") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + trial % 4;
    const MatrixXd z = random_rows(gen, dim + 3, dim);
    const Design design = solve_g_optimal(z, z);
    CHECK(design.objective_value >= dim - 1e-9);
    CHECK(design.objective_value <= dim * (1 + 1e-4));
  }
}

TEST_CASE("E-optimal scale equivariance") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 2 + trial % 3;
    const MatrixXd z = random_rows(gen, dim + 2, dim);
    const Design base = solve_e_optimal(z);
    const double c = 4.0;
    const Design scaled = solve_e_optimal(MatrixXd(std::sqrt(c) * z));
    CHECK(scaled.objective_value == doctest::Approx(base.objective_value / c).epsilon(1e-3));
    Eigen::Index a = 0, b = 0;
    base.weights.maxCoeff(&a);
    scaled.weights.maxCoeff(&b);
    CHECK(a == b);
    CHECK(base.converged);
    for (std::size_t i = 1; i < base.trace.size(); ++i) CHECK(base.trace[i] <= base.trace[i - 1] + 1e-12);
  }
}

TEST_CASE("E-optimal over general PSD items") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 3;
    std::vector<MatrixXd> items;
    for (int i = 0; i < 5; ++i) {
      const MatrixXd f = random_rows(gen, 2, dim);
      items.push_back(f.transpose() * f / 2.0);
    }
    const Design design = solve_e_optimal(items);
    CHECK(design.converged);
    CHECK(design.certificate_gap <= 1e-4);
  }
}
