#include "mtbandit/linalg.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <vector>

namespace mtbandit::linalg {

SymmetricInverse inverse_spd(const MatrixXd& a, double jitter) {
  const Eigen::Index dim = a.rows();
  SymmetricInverse out;
  if (dim == 0) return out;

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(a));
  VectorXd values = eig.eigenvalues();
  const double largest = values.maxCoeff();
  const double smallest = values.minCoeff();
  if (!(largest > 0.0) || !std::isfinite(largest)) return out;

  if (smallest <= largest / kConditionLimit) {
    const double ridge = jitter * a.trace() / static_cast<double>(dim);
    values.array() += ridge;
    out.jittered = true;
    if (values.minCoeff() <= largest * std::numeric_limits<double>::epsilon()) return out;
  }
  out.inverse = eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return out;
}

double min_eigenvalue(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(a), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

double spectral_norm(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(a);
  return svd.singularValues()(0);
}

double max_quadratic_form(const MatrixXd& targets, const MatrixXd& m) {
  const MatrixXd projected = targets * m;
  return (projected.array() * targets.array()).rowwise().sum().maxCoeff();
}

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

VectorXd nnls(const MatrixXd& a, const VectorXd& b, int max_iterations) {
  const Eigen::Index n = a.cols();
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 10);
  VectorXd x = VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff() * b.cwiseAbs().maxCoeff()) * static_cast<double>(n);

  auto solve_passive = [&](VectorXd& s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    s.setZero(n);
    if (idx.empty()) return;
    MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(idx[c]);
    const VectorXd z = sub.colPivHouseholderQr().solve(b);
    for (std::size_t c = 0; c < idx.size(); ++c) s(idx[c]) = z(static_cast<Eigen::Index>(c));
  };

  for (int outer = 0; outer < max_iterations; ++outer) {
    const VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    VectorXd s;
    for (int inner = 0; inner < max_iterations; ++inner) {
      solve_passive(s);
      double alpha = 1.0;
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
          feasible = false;
          const double denom = x(j) - s(j);
          if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
        }
      }
      if (feasible) break;
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
    x = s.cwiseMax(0.0);
  }
  return x;
}

Eigen::Index numerical_rank(const MatrixXd& a, double relative_threshold) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(a);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > relative_threshold * sv(0)) ++rank;
  return rank;
}

}  // namespace mtbandit::linalg
