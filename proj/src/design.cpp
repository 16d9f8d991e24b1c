#include "mtbandit/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtbandit/error.hpp"
#include "mtbandit/linalg.hpp"

namespace mtbandit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMuFloor = 1e-14;
constexpr int kInnerCap = 100;
constexpr double kArmijo = 0.25;

// Solves the equality-constrained Newton system [H 1; 1ᵀ 0] for (λ, t) with
// the simplex constraint acting on the first n coordinates only.
bool newton_direction(const MatrixXd& hessian, const VectorXd& gradient, Eigen::Index n, VectorXd& step) {
  const Eigen::Index size = hessian.rows();
  MatrixXd kkt = MatrixXd::Zero(size + 1, size + 1);
  kkt.topLeftCorner(size, size) = hessian;
  kkt.block(0, size, n, 1).setOnes();
  kkt.block(size, 0, 1, n).setOnes();
  VectorXd rhs = VectorXd::Zero(size + 1);
  rhs.head(size) = -gradient;
  const VectorXd sol = kkt.partialPivLu().solve(rhs);
  if (!sol.allFinite()) return false;
  step = sol.head(size);
  return true;
}

// ---------------------------------------------------------------- G criterion

struct GState {
  MatrixXd inverse;  // A⁻¹
  MatrixXd projected;  // Y A⁻¹
  VectorXd values;   // v_y = yᵀ A⁻¹ y
};

bool g_evaluate(const MatrixXd& z, const MatrixXd& y, const VectorXd& lambda, GState& out) {
  const MatrixXd a = z.transpose() * lambda.asDiagonal() * z;
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return false;
  out.inverse = llt.solve(MatrixXd::Identity(a.rows(), a.cols()));
  if (!out.inverse.allFinite()) return false;
  out.projected = y * out.inverse;
  out.values = (out.projected.array() * y.array()).rowwise().sum();
  return true;
}

double g_barrier(const MatrixXd& z, const MatrixXd& y, const VectorXd& lambda, double t, double mu) {
  if ((lambda.array() <= 0.0).any()) return kInf;
  GState s;
  if (!g_evaluate(z, y, lambda, s)) return kInf;
  const VectorXd slack = (t - s.values.array()).matrix();
  if ((slack.array() <= 0.0).any()) return kInf;
  return t - mu * slack.array().log().sum() - mu * lambda.array().log().sum();
}

// Weak-duality bound: for any distribution π over targets,
// OPT ≥ 2 Σ π_y v_y − max_i Σ π_y (yᵀA⁻¹z_i)².
double g_lower_bound(const VectorXd& pi, const VectorXd& values, const MatrixXd& squared) {
  return 2.0 * pi.dot(values) - (squared.transpose() * pi).maxCoeff();
}

// Recovers a dual π from the KKT conditions at λ: targets near the max, items
// with mass, and G_Sᵀ π = f·1 solved by NNLS.
double g_dual_recovery(const VectorXd& lambda, const VectorXd& values, const MatrixXd& squared, double f) {
  double best = -kInf;
  for (double eps : {1e-2, 1e-3, 1e-4, 1e-6}) {
    std::vector<Eigen::Index> rows, cols;
    for (Eigen::Index j = 0; j < values.size(); ++j)
      if (values(j) >= f * (1.0 - eps)) rows.push_back(j);
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
      if (lambda(i) > eps * 0.1) cols.push_back(i);
    if (rows.empty() || cols.empty()) continue;
    MatrixXd sys(static_cast<Eigen::Index>(cols.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      for (std::size_t r = 0; r < rows.size(); ++r)
        sys(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = squared(rows[r], cols[c]);
    const VectorXd x = linalg::nnls(sys, VectorXd::Constant(static_cast<Eigen::Index>(cols.size()), f));
    const double total = x.sum();
    if (!(total > 0.0)) continue;
    VectorXd pi = VectorXd::Zero(values.size());
    for (std::size_t r = 0; r < rows.size(); ++r) pi(rows[r]) = x(static_cast<Eigen::Index>(r)) / total;
    best = std::max(best, g_lower_bound(pi, values, squared));
  }
  return best;
}

MatrixXd squared_cross(const GState& s, const MatrixXd& z) {
  return (s.projected * z.transpose()).array().square().matrix();
}

// ---------------------------------------------------------------- E criterion

MatrixXd weighted_sum(const VectorXd& lambda, const std::vector<MatrixXd>& items) {
  MatrixXd a = MatrixXd::Zero(items.front().rows(), items.front().cols());
  for (std::size_t i = 0; i < items.size(); ++i) a += lambda(static_cast<Eigen::Index>(i)) * items[i];
  return linalg::symmetrize(a);
}

double e_barrier(const std::vector<MatrixXd>& items, const VectorXd& lambda, double t, double mu) {
  if ((lambda.array() <= 0.0).any()) return kInf;
  MatrixXd shifted = weighted_sum(lambda, items);
  shifted.diagonal().array() -= t;
  Eigen::LLT<MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) return kInf;
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  if (!std::isfinite(logdet)) return kInf;
  return -t - mu * logdet - mu * lambda.array().log().sum();
}

// Upper bound on max σ_min from a trace-one PSD W: max_i ⟨W, Q_i⟩.
double e_upper_bound(const MatrixXd& w, const std::vector<MatrixXd>& items) {
  double ub = -kInf;
  for (const auto& q : items) ub = std::max(ub, (w.array() * q.array()).sum());
  return ub;
}

}  // namespace

// ---------------------------------------------------------------- public

MatrixXd design_covariance(const VectorXd& weights, const MatrixXd& items) {
  return linalg::symmetrize(items.transpose() * weights.asDiagonal() * items);
}

MatrixXd design_covariance(const VectorXd& weights, const std::vector<MatrixXd>& items) {
  if (items.empty()) throw Error(ErrorCode::kInvalidShape, "no items");
  return weighted_sum(weights, items);
}

double g_criterion(const MatrixXd& covariance, const MatrixXd& targets) {
  const auto inv = linalg::inverse_spd(covariance);
  if (inv.inverse.size() == 0) throw Error(ErrorCode::kSingularCovariance, "design covariance is singular");
  if (targets.rows() == 0) return 0.0;
  return linalg::max_quadratic_form(targets, inv.inverse);
}

double e_criterion(const MatrixXd& covariance) {
  const double sigma = linalg::min_eigenvalue(covariance);
  if (!(sigma > 0.0)) throw Error(ErrorCode::kSingularCovariance, "design covariance is singular");
  return 1.0 / sigma;
}

MatrixXd difference_targets(const MatrixXd& rows) {
  const Eigen::Index n = rows.rows();
  MatrixXd out(n * (n - 1) / 2, rows.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) out.row(r++) = rows.row(i) - rows.row(j);
  return out;
}

Design solve_g_optimal(const MatrixXd& z, const MatrixXd& y, const SolverOptions& options) {
  const Eigen::Index n = z.rows();
  const Eigen::Index dim = z.cols();
  if (y.rows() == 0) throw Error(ErrorCode::kEmptyTargets, "G-optimal design needs at least one target");
  if (y.cols() != dim) throw Error(ErrorCode::kInvalidShape, "targets and items differ in dimension");
  if (n == 0 || linalg::numerical_rank(z) < dim)
    throw Error(ErrorCode::kRankDeficient, "items do not span the design space");

  Design out;
  VectorXd lambda = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  GState state;
  if (!g_evaluate(z, y, lambda, state)) throw Error(ErrorCode::kRankDeficient, "uniform design is singular");

  // All-zero targets: every design is optimal.
  if (state.values.maxCoeff() <= 0.0) {
    out.weights = lambda;
    out.covariance = design_covariance(lambda, z);
    out.objective_value = 0.0;
    out.converged = true;
    out.trace.push_back(0.0);
    return out;
  }

  const Eigen::Index m = y.rows();
  double t = state.values.maxCoeff() * 1.1 + 1e-3;
  double mu = t / static_cast<double>(m + n);
  double best_lb = -kInf;
  double best_f = kInf;
  VectorXd best_lambda = lambda;
  double fresh_gap = kInf;
  int newton = 0;

  while (true) {
    for (int inner = 0; inner < kInnerCap && newton < options.max_iterations; ++inner) {
      if (!g_evaluate(z, y, lambda, state)) break;
      const VectorXd slack = (t - state.values.array()).matrix();
      const MatrixXd u = state.projected * z.transpose();  // m × n
      const MatrixXd g = u.array().square().matrix();
      const MatrixXd k = z * state.inverse * z.transpose();
      const VectorXd w1 = (mu / slack.array()).matrix();
      const VectorXd w2 = (mu / slack.array().square()).matrix();

      MatrixXd hessian(n + 1, n + 1);
      hessian.topLeftCorner(n, n) = g.transpose() * w2.asDiagonal() * g +
                                    2.0 * ((u.transpose() * w1.asDiagonal() * u).array() * k.array()).matrix();
      hessian.topLeftCorner(n, n).diagonal().array() += mu / lambda.array().square();
      const VectorXd cross = g.transpose() * w2;
      hessian.block(0, n, n, 1) = cross;
      hessian.block(n, 0, 1, n) = cross.transpose();
      hessian(n, n) = w2.sum();

      VectorXd gradient(n + 1);
      gradient.head(n) = -(g.transpose() * w1) - (mu / lambda.array()).matrix();
      gradient(n) = 1.0 - w1.sum();

      VectorXd step;
      ++newton;
      if (!newton_direction(hessian, gradient, n, step)) break;
      const double slope = gradient.dot(step);
      if (-slope / 2.0 < 1e-10) break;

      const double f0 = g_barrier(z, y, lambda, t, mu);
      double size = 1.0;
      bool accepted = false;
      while (size >= 1e-14) {
        if (g_barrier(z, y, lambda + size * step.head(n), t + size * step(n), mu) <= f0 + kArmijo * size * slope) {
          accepted = true;
          break;
        }
        size *= 0.5;
      }
      if (!accepted) break;
      lambda += size * step.head(n);
      t += size * step(n);
    }

    if (!g_evaluate(z, y, lambda, state)) break;
    const double f = state.values.maxCoeff();
    if (f < best_f) {
      best_f = f;
      best_lambda = lambda;
    }
    const MatrixXd sq = squared_cross(state, z);
    VectorXd pi = (mu / (t - state.values.array())).matrix();
    pi /= pi.sum();
    best_lb = std::max({best_lb, g_lower_bound(pi, state.values, sq), g_dual_recovery(lambda, state.values, sq, f)});
    out.trace.push_back(best_f);

    // Stop on a certificate that kw_gap can reproduce from the weights alone.
    fresh_gap = best_f - best_lb <= options.tol ? kw_gap(best_lambda, z, y) : kInf;
    if (fresh_gap <= options.tol || mu < kMuFloor || newton >= options.max_iterations) break;
    mu *= 0.2;
  }

  out.weights = best_lambda;
  out.covariance = design_covariance(best_lambda, z);
  out.objective_value = best_f;
  out.certificate_gap = std::max(0.0, std::min(best_f - best_lb, fresh_gap));
  out.converged = out.certificate_gap <= options.tol;
  out.iterations = newton;
  return out;
}

Design solve_e_optimal(const std::vector<MatrixXd>& items, const SolverOptions& options) {
  if (items.empty()) throw Error(ErrorCode::kRankDeficient, "no items");
  const Eigen::Index n = static_cast<Eigen::Index>(items.size());
  const Eigen::Index dim = items.front().rows();
  for (const auto& q : items)
    if (q.rows() != dim || q.cols() != dim) throw Error(ErrorCode::kInvalidShape, "item matrices differ in shape");

  VectorXd lambda = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const MatrixXd start = weighted_sum(lambda, items);
  const double sigma0 = linalg::min_eigenvalue(start);
  if (!(sigma0 > 1e-12 * std::max(1.0, start.trace())))
    throw Error(ErrorCode::kRankDeficient, "items do not jointly span the space");

  double t = 0.5 * sigma0;
  double mu = sigma0 / static_cast<double>(dim + n);
  double best_sigma = sigma0;
  VectorXd best_lambda = lambda;
  double best_ub = kInf;
  int newton = 0;
  Design out;

  while (true) {
    for (int inner = 0; inner < kInnerCap && newton < options.max_iterations; ++inner) {
      MatrixXd shifted = weighted_sum(lambda, items);
      shifted.diagonal().array() -= t;
      Eigen::LLT<MatrixXd> llt(shifted);
      if (llt.info() != Eigen::Success) break;
      const MatrixXd r = llt.solve(MatrixXd::Identity(dim, dim));
      std::vector<MatrixXd> rq(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) rq[i] = r * items[i];

      MatrixXd hessian(n + 1, n + 1);
      VectorXd gradient(n + 1);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& pi = rq[static_cast<std::size_t>(i)];
        gradient(i) = -mu * pi.trace() - mu / lambda(i);
        for (Eigen::Index j = i; j < n; ++j) {
          const double v = mu * (pi.array() * rq[static_cast<std::size_t>(j)].transpose().array()).sum();
          hessian(i, j) = v;
          hessian(j, i) = v;
        }
        hessian(i, i) += mu / (lambda(i) * lambda(i));
        const double c = -mu * (pi * r).trace();
        hessian(i, n) = c;
        hessian(n, i) = c;
      }
      gradient(n) = -1.0 + mu * r.trace();
      hessian(n, n) = mu * (r.array() * r.array()).sum();

      VectorXd step;
      ++newton;
      if (!newton_direction(hessian, gradient, n, step)) break;
      const double slope = gradient.dot(step);
      if (-slope / 2.0 < 1e-12) break;

      const double f0 = e_barrier(items, lambda, t, mu);
      double size = 1.0;
      bool accepted = false;
      while (size >= 1e-14) {
        if (e_barrier(items, lambda + size * step.head(n), t + size * step(n), mu) <= f0 + kArmijo * size * slope) {
          accepted = true;
          break;
        }
        size *= 0.5;
      }
      if (!accepted) break;
      lambda += size * step.head(n);
      t += size * step(n);
    }

    const MatrixXd a = weighted_sum(lambda, items);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
    const double sigma = eig.eigenvalues()(0);
    if (sigma > best_sigma) {
      best_sigma = sigma;
      best_lambda = lambda;
    }

    // Two dual candidates: the barrier's R/tr R and the bottom eigenspace.
    MatrixXd shifted = a;
    shifted.diagonal().array() -= t;
    Eigen::LLT<MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      const MatrixXd r = llt.solve(MatrixXd::Identity(dim, dim));
      best_ub = std::min(best_ub, e_upper_bound(r / r.trace(), items));
    }
    for (double eps : {1e-3, 1e-6}) {
      MatrixXd w = MatrixXd::Zero(dim, dim);
      int count = 0;
      for (Eigen::Index i = 0; i < dim; ++i) {
        if (eig.eigenvalues()(i) <= sigma + eps * std::max(1.0, std::abs(sigma))) {
          w += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose();
          ++count;
        }
      }
      best_ub = std::min(best_ub, e_upper_bound(w / count, items));
    }
    out.trace.push_back(1.0 / best_sigma);

    const double gap = 1.0 / best_sigma - 1.0 / best_ub;
    if (gap <= options.tol || mu < kMuFloor * std::max(1.0, sigma0) || newton >= options.max_iterations) break;
    mu *= 0.2;
  }

  out.weights = best_lambda;
  out.covariance = weighted_sum(best_lambda, items);
  out.objective_value = 1.0 / best_sigma;
  out.certificate_gap = std::max(0.0, 1.0 / best_sigma - 1.0 / best_ub);
  out.converged = out.certificate_gap <= options.tol;
  out.iterations = newton;
  return out;
}

Design solve_e_optimal(const MatrixXd& items, const SolverOptions& options) {
  std::vector<MatrixXd> qs;
  qs.reserve(static_cast<std::size_t>(items.rows()));
  for (Eigen::Index i = 0; i < items.rows(); ++i) qs.push_back(items.row(i).transpose() * items.row(i));
  return solve_e_optimal(qs, options);
}

double kw_gap(const VectorXd& weights, const MatrixXd& items, const MatrixXd& targets) {
  if (targets.rows() == 0) throw Error(ErrorCode::kEmptyTargets, "no targets");
  VectorXd lambda = weights.cwiseMax(0.0);
  lambda /= lambda.sum();
  GState state;
  const MatrixXd a = design_covariance(lambda, items);
  if (linalg::min_eigenvalue(a) <= 1e-14 * std::max(1.0, a.trace()) || !g_evaluate(items, targets, lambda, state))
    throw Error(ErrorCode::kSingularCovariance, "design covariance is singular");
  const double f = state.values.maxCoeff();
  if (f <= 0.0) return 0.0;
  const MatrixXd sq = squared_cross(state, items);

  // Candidate duals: KKT recovery, uniform over the maximizers, and a softmax.
  double lb = g_dual_recovery(lambda, state.values, sq, f);
  for (double eps : {1e-9, 1e-6, 1e-3}) {
    VectorXd pi = (state.values.array() >= f * (1.0 - eps)).cast<double>().matrix();
    pi /= pi.sum();
    lb = std::max(lb, g_lower_bound(pi, state.values, sq));
  }
  for (double temp : {1e-2, 1e-3, 1e-4}) {
    VectorXd pi = ((state.values.array() - f) / (temp * f)).exp().matrix();
    pi /= pi.sum();
    lb = std::max(lb, g_lower_bound(pi, state.values, sq));
  }
  return std::max(0.0, f - lb);
}

double kw_gap(const Design& design, const MatrixXd& items, const MatrixXd& targets) {
  return kw_gap(design.weights, items, targets);
}

}  // namespace mtbandit
