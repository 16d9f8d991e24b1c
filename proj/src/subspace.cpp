#include "mtbandit/subspace.hpp"

#include <cmath>

#include "mtbandit/error.hpp"
#include "mtbandit/linalg.hpp"

namespace mtbandit {

namespace {

// Inverse of a realized Gram with the contextual fallback: one ridge retry.
bool realized_inverse(const MatrixXd& gram, MatrixXd& inverse, int& fallbacks) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(linalg::symmetrize(gram));
  VectorXd values = eig.eigenvalues();
  const double largest = values.maxCoeff();
  if (!(largest > 0.0)) return false;
  if (values.minCoeff() <= largest / linalg::kConditionLimit) {
    values.array() += 1e-8 * gram.trace() / static_cast<double>(gram.rows());
    ++fallbacks;
    if (!(values.minCoeff() > 0.0)) return false;
  }
  inverse = eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return true;
}

}  // namespace

SubspaceEstimate top_k_subspace(const MatrixXd& z, int k) {
  const int d = static_cast<int>(z.rows());
  if (z.cols() != d || k < 1 || k > d) throw Error(ErrorCode::kInvalidShape, "Z must be square and 1 ≤ k ≤ d");
  Eigen::JacobiSVD<MatrixXd> svd(z, Eigen::ComputeFullU);
  SubspaceEstimate out;
  out.singular_values = svd.singularValues();
  out.basis = svd.matrixU().leftCols(k);
  for (int c = 0; c < k; ++c) {
    for (int r = 0; r < d; ++r) {
      const double v = out.basis(r, c);
      if (std::abs(v) > 1e-12) {
        if (v < 0.0) out.basis.col(c) *= -1.0;
        break;
      }
    }
  }
  out.spectral_gap = out.singular_values(k - 1) - (k < d ? out.singular_values(k) : 0.0);
  return out;
}

double sin_theta(const MatrixXd& estimate, const MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw Error(ErrorCode::kShapeMismatch, "bases differ in shape");
  const MatrixXd residual = truth - estimate * (estimate.transpose() * truth);
  return linalg::spectral_norm(residual);
}

double sin_theta(const SubspaceEstimate& estimate, const MatrixXd& truth) {
  return sin_theta(estimate.basis, truth);
}

double batch_pinv_norm(const MatrixXd& arms, const std::vector<int>& sequence) {
  MatrixXd x(static_cast<Eigen::Index>(sequence.size()), arms.cols());
  for (std::size_t i = 0; i < sequence.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = arms.row(sequence[i]);
  const MatrixXd gram = x.transpose() * x;
  const MatrixXd pinv = gram.ldlt().solve(x.transpose());
  return linalg::spectral_norm(pinv);
}

RecoveryResult feat_recover(LinearEnvironment& env, const std::vector<int>& batch, int rounds, int k,
                            std::uint64_t seed, int phase, bool bias_correction) {
  const BanditInstance& inst = env.instance();
  const int d = inst.dim();
  const int tasks = inst.num_tasks();
  if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "T must be at least 1");
  if (batch.empty()) throw Error(ErrorCode::kSingularBatch, "empty batch");

  const MatrixXd& arms = inst.arms().arms;
  MatrixXd gram = MatrixXd::Zero(d, d);
  for (int a : batch) gram += arms.row(a).transpose() * arms.row(a);
  const auto inv = linalg::inverse_spd(gram);
  if (inv.inverse.size() == 0 || inv.jittered) throw Error(ErrorCode::kSingularBatch, "batch Gram is singular");
  const MatrixXd& gram_inv = inv.inverse;

  MatrixXd accum = MatrixXd::Zero(d, d);
  VectorXd response(d);
  for (int m = 0; m < tasks; ++m) {
    RandomStream rng(seed, {hash_label("feat"), static_cast<std::uint64_t>(phase), static_cast<std::uint64_t>(m)});
    for (int j = 0; j < rounds; ++j) {
      response.setZero();
      for (int a : batch) response += arms.row(a).transpose() * env.pull(m, a, rng);
      const VectorXd theta = gram_inv * response;
      accum.noalias() += theta * theta.transpose();
    }
  }

  RecoveryResult out;
  out.moment.z = accum / (static_cast<double>(tasks) * rounds);
  if (bias_correction) out.moment.z -= gram_inv;
  out.moment.z = linalg::symmetrize(out.moment.z);
  out.moment.tasks = tasks;
  out.moment.rounds = rounds;
  out.moment.bias_corrected = bias_correction;
  out.estimate = top_k_subspace(out.moment.z, k);
  out.samples_used = static_cast<std::uint64_t>(tasks) * rounds * batch.size();
  return out;
}

RecoveryResult c_feat_recover(ContextualEnvironment& env, const std::vector<int>& batch, int rounds, int k,
                              std::uint64_t seed) {
  const ContextualInstance& inst = env.instance();
  const ContextModel& ctx = inst.context();
  const int d = inst.dim();
  const int tasks = inst.num_tasks();
  if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "T must be at least 1");
  if (batch.empty()) throw Error(ErrorCode::kSingularRealizedGram, "empty batch");

  RecoveryResult out;
  MatrixXd accum = MatrixXd::Zero(d, d);
  MatrixXd gram(d, d);
  MatrixXd gram_inv;
  VectorXd response(d);
  VectorXd estimates[2];
  for (int m = 0; m < tasks; ++m) {
    RandomStream rng(seed, {hash_label("c-feat"), static_cast<std::uint64_t>(m)});
    for (int j = 0; j < rounds; ++j) {
      for (VectorXd& theta : estimates) {
        gram.setZero();
        response.setZero();
        for (int a : batch) {
          const int s = env.observe_context(rng);
          const double r = env.act(m, s, a, rng);
          const auto phi = ctx.features[static_cast<std::size_t>(s)].row(a);
          gram.noalias() += phi.transpose() * phi;
          response += phi.transpose() * r;
        }
        if (!realized_inverse(gram, gram_inv, out.jitter_fallbacks))
          throw Error(ErrorCode::kSingularRealizedGram, "realized Gram singular after ridge fallback");
        theta = gram_inv * response;
      }
      accum.noalias() += estimates[0] * estimates[1].transpose();
    }
  }

  out.moment.z = accum / (static_cast<double>(tasks) * rounds);
  out.moment.tasks = tasks;
  out.moment.rounds = rounds;
  out.moment.bias_corrected = false;
  out.estimate = top_k_subspace(out.moment.z, k);
  out.samples_used = 2ULL * static_cast<std::uint64_t>(tasks) * rounds * batch.size();
  return out;
}

}  // namespace mtbandit
