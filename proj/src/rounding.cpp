#include "mtbandit/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mtbandit/error.hpp"
#include "mtbandit/linalg.hpp"

namespace mtbandit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixXd counted_sum(const std::vector<MatrixXd>& items, const std::vector<int>& counts) {
  MatrixXd s = MatrixXd::Zero(items.front().rows(), items.front().cols());
  for (std::size_t i = 0; i < items.size(); ++i)
    if (counts[i] != 0) s += static_cast<double>(counts[i]) * items[i];
  return linalg::symmetrize(s);
}

double e_value(const MatrixXd& s) {
  const double sigma = linalg::min_eigenvalue(s);
  return sigma > 1e-12 * std::max(1.0, s.trace()) ? 1.0 / sigma : kInf;
}

double g_value(const MatrixXd& s, const MatrixXd& targets) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success || linalg::min_eigenvalue(s) <= 1e-12 * std::max(1.0, s.trace())) return kInf;
  const MatrixXd solved = llt.solve(targets.transpose());
  return (solved.array() * targets.transpose().array()).colwise().sum().maxCoeff();
}

}  // namespace

int minimum_batch_size(int dim, double zeta, double scale_round) {
  return static_cast<int>(std::ceil(scale_round * 180.0 * dim / (zeta * zeta) - 1e-9));
}

std::vector<int> apportion(const VectorXd& weights, int n) {
  const auto size = static_cast<std::size_t>(weights.size());
  std::vector<int> counts(size, 0);
  std::vector<double> remainder(size, 0.0);
  int assigned = 0;
  for (std::size_t i = 0; i < size; ++i) {
    const double share = std::max(0.0, weights(static_cast<Eigen::Index>(i))) * n;
    counts[i] = static_cast<int>(std::floor(share));
    remainder[i] = share - counts[i];
    assigned += counts[i];
  }
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < n; r = (r + 1) % size) {
    ++counts[order[r]];
    ++assigned;
  }
  // Over-assignment only arises from weights that sum above one.
  while (assigned > n) {
    --*std::max_element(counts.begin(), counts.end());
    --assigned;
  }
  return counts;
}

RoundedBatch round_design(const std::vector<MatrixXd>& items, const VectorXd& weights, int n,
                          const RoundingCriterion& criterion, const RoundingOptions& options) {
  if (items.empty() || weights.size() != static_cast<Eigen::Index>(items.size()))
    throw Error(ErrorCode::kInvalidShape, "weights and items differ in length");
  const int dim = static_cast<int>(items.front().rows());
  const int floor_n = minimum_batch_size(dim, options.zeta, options.scale_round);
  if (n < floor_n || n < 1)
    throw Error(ErrorCode::kNTooSmall, "N = " + std::to_string(n) + " is below " + std::to_string(floor_n));

  VectorXd lambda = weights.cwiseMax(0.0);
  lambda /= lambda.sum();
  const MatrixXd a = design_covariance(lambda, items);
  const double sigma = linalg::min_eigenvalue(a);
  if (!(sigma > 1e-14 * std::max(1.0, a.trace())))
    throw Error(ErrorCode::kSingularCovariance, "design covariance is singular");

  const bool use_g = criterion.kind == CriterionKind::kG;
  const double reference_e = 1.0 / (n * sigma);
  const double reference_g = use_g ? g_value(static_cast<double>(n) * a, criterion.targets) : 0.0;
  auto value = [&](const std::vector<int>& counts) {
    const MatrixXd s = counted_sum(items, counts);
    return use_g ? g_value(s, criterion.targets) : e_value(s);
  };
  const double reference = use_g ? reference_g : reference_e;
  const double limit = (1.0 + options.zeta) * reference;

  RoundedBatch out;
  out.counts = apportion(lambda, n);
  double current = value(out.counts);

  // Greedy single-unit moves, only when apportionment alone misses the bound.
  const int budget = 10 * static_cast<int>(items.size());
  while (current > limit && out.swaps < budget) {
    double best = current;
    std::size_t from = 0, to = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (out.counts[i] == 0) continue;
      for (std::size_t j = 0; j < items.size(); ++j) {
        if (i == j) continue;
        --out.counts[i];
        ++out.counts[j];
        const double v = value(out.counts);
        ++out.counts[i];
        --out.counts[j];
        if (v < best) {
          best = v;
          from = i;
          to = j;
        }
      }
    }
    if (!(best < current)) break;
    --out.counts[from];
    ++out.counts[to];
    current = best;
    ++out.swaps;
  }

  const MatrixXd s = counted_sum(items, out.counts);
  out.realized_factor_E = e_value(s) / reference_e;
  if (use_g) out.realized_factor_G = reference_g > 0.0 ? g_value(s, criterion.targets) / reference_g : 1.0;
  const double factor = use_g ? *out.realized_factor_G : out.realized_factor_E;
  out.certified = factor <= 1.0 + options.zeta;

  for (std::size_t i = 0; i < out.counts.size(); ++i)
    out.sequence.insert(out.sequence.end(), static_cast<std::size_t>(out.counts[i]), static_cast<int>(i));

  if (!out.certified && options.require_certificate)
    throw Error(ErrorCode::kRoundingFailed, "realized factor " + std::to_string(factor) + " exceeds 1 + zeta");
  return out;
}

RoundedBatch round_design(const MatrixXd& items, const VectorXd& weights, int n, const RoundingCriterion& criterion,
                          const RoundingOptions& options) {
  std::vector<MatrixXd> qs;
  qs.reserve(static_cast<std::size_t>(items.rows()));
  for (Eigen::Index i = 0; i < items.rows(); ++i) qs.push_back(items.row(i).transpose() * items.row(i));
  return round_design(qs, weights, n, criterion, options);
}

}  // namespace mtbandit
