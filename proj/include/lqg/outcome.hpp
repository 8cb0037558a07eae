#pragma once

// Gaussian moments of the outcome (theta, X(.)) induced by an affine profile,
// conditioning on the state, obedience residuals and seeded sampling.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lqg/core.hpp"

namespace lqg {

/// `cov_xx` is the covariance of the actions as finitely many random variables
/// (diagonal = Var X(i)). `kernel_diag` is the kernel extension on the
/// diagonal, phi(i)^T P(i,i) phi(i) with the kernel block, used by sums that
/// stand in for integrals over agents.
struct OutcomeMoments {
  VectorXd mean_x;
  MatrixXd cov_xx;
  VectorXd kernel_diag;
  VectorXd cov_xtheta;
  double mu_theta = 0.0;
  double var_theta = 1.0;

  Index size() const { return mean_x.size(); }

  /// Covariance matrix as the kernel sees it.
  MatrixXd kernel_cov() const {
    MatrixXd k = cov_xx;
    k.diagonal() = kernel_diag;
    return k;
  }
};

struct ConditionalOutcome {
  double theta_bar = 0.0;
  VectorXd cond_mean;
  MatrixXd cond_cov;
  VectorXd cond_kernel_diag;

  Index size() const { return cond_mean.size(); }
};

inline OutcomeMoments outcome_moments(const StandardizedInfo& info, const AffineProfile& prof) {
  const Index n = info.size();
  const Index d = info.d;
  require(prof.size() == n && prof.dim() == d, ErrorKind::DimensionMismatch,
          "profile dimensions do not match the information structure");
  const VectorXd slopes = flatten_slopes(prof.phi);

  OutcomeMoments mom;
  mom.mu_theta = info.prior.mu;
  mom.var_theta = info.prior.var;
  mom.mean_x = prof.phi0;
  mom.cov_xx.resize(n, n);
  mom.kernel_diag.resize(n);
  mom.cov_xtheta.resize(n);
  const double sd = info.prior.sd();
  for (Index i = 0; i < n; ++i) {
    const auto phi_i = slopes.segment(i * d, d);
    for (Index j = 0; j < n; ++j) {
      mom.cov_xx(i, j) = phi_i.dot(info.kernel.block(i * d, j * d, d, d) * slopes.segment(j * d, d));
    }
    mom.kernel_diag[i] = mom.cov_xx(i, i);
    mom.cov_xx(i, i) = phi_i.squaredNorm();
    mom.cov_xtheta[i] = sd * phi_i.dot(info.theta_block(i));
  }
  return mom;
}

inline ConditionalOutcome condition_on_state(const OutcomeMoments& mom, double theta_bar) {
  require(mom.var_theta > 0.0, ErrorKind::InvalidArgument, "state variance must be positive");
  ConditionalOutcome c;
  c.theta_bar = theta_bar;
  c.cond_mean = mom.mean_x + mom.cov_xtheta * ((theta_bar - mom.mu_theta) / mom.var_theta);
  c.cond_cov = mom.cov_xx - mom.cov_xtheta * mom.cov_xtheta.transpose() / mom.var_theta;
  c.cond_kernel_diag = mom.kernel_diag - mom.cov_xtheta.cwiseProduct(mom.cov_xtheta) / mom.var_theta;
  return c;
}

struct ObedienceResiduals {
  VectorXd first;   // mean condition
  VectorXd second;  // variance condition
};

inline ObedienceResiduals obedience_residuals(const OutcomeMoments& mom, const PayoffStructure& payoff,
                                              const AgentGrid& grid) {
  payoff.validate();
  require(payoff.size() == mom.size() && grid.size() == mom.size(), ErrorKind::DimensionMismatch,
          "moments, payoff and grid must share n");
  const double wt = grid.weight();
  ObedienceResiduals r;
  r.first = mom.mean_x - wt * (payoff.w * mom.mean_x) - mom.mu_theta * payoff.b - payoff.c;
  const MatrixXd kcov = mom.kernel_cov();
  r.second = mom.cov_xx.diagonal() - wt * (payoff.w.cwiseProduct(kcov)).rowwise().sum() -
             payoff.b.cwiseProduct(mom.cov_xtheta);
  return r;
}

// ---------------------------------------------------------------------------
// Sampling

inline constexpr const char* kRngAlgorithm = "mt19937_64 (std::seed_seq stream split) + std::normal_distribution";

/// Multivariate normal sampler with an eigen-decomposition square root;
/// eigenvalues are clamped at zero.
class GaussianSampler {
 public:
  GaussianSampler(VectorXd mean, const MatrixXd& cov, double psd_tol = kDefaultTolerances.psd)
      : mean_(std::move(mean)) {
    require(cov.rows() == mean_.size() && cov.cols() == mean_.size(), ErrorKind::DimensionMismatch,
            "sampler covariance must match the mean");
    const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
    const double lam = linalg::min_eigenvalue(cov);
    if (lam < -psd_tol * scale) fail(ErrorKind::NotPSD, "sampling covariance has eigenvalue " + format_number(lam));
    factor_ = linalg::psd_factor(cov);
  }

  Index dim() const { return mean_.size(); }

  /// `draws` columns of samples from stream `stream` of `seed`.
  MatrixXd sample(Index draws, std::uint64_t seed, std::uint64_t stream = 0) const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd z(dim(), draws);
    for (Index c = 0; c < draws; ++c)
      for (Index r = 0; r < dim(); ++r) z(r, c) = normal(rng);
    MatrixXd out = factor_ * z;
    out.colwise() += mean_;
    return out;
  }

 private:
  VectorXd mean_;
  MatrixXd factor_;
};

/// Draws (theta, X(subset)) jointly; row k of the result is one draw with
/// theta in column 0.
inline MatrixXd sample_outcome(const OutcomeMoments& mom, const IndexSet& subset, Index draws, std::uint64_t seed) {
  require(!subset.empty() && subset.size() <= 2000, ErrorKind::InvalidArgument, "subset size must be in [1,2000]");
  require(draws > 0, ErrorKind::InvalidArgument, "draws must be positive");
  const Index k = static_cast<Index>(subset.size());
  VectorXd mean(k + 1);
  MatrixXd cov(k + 1, k + 1);
  mean[0] = mom.mu_theta;
  cov(0, 0) = mom.var_theta;
  for (Index a = 0; a < k; ++a) {
    mean[a + 1] = mom.mean_x[subset[a]];
    cov(0, a + 1) = cov(a + 1, 0) = mom.cov_xtheta[subset[a]];
    for (Index b = 0; b < k; ++b) cov(a + 1, b + 1) = mom.cov_xx(subset[a], subset[b]);
  }
  return GaussianSampler(mean, cov).sample(draws, seed).transpose();
}

/// Empirical conditional moments from `draws` samples of X | theta = theta_bar,
/// accumulated in batches so memory stays bounded. The kernel diagonal is not
/// observable from samples and is set to the empirical variance.
inline ConditionalOutcome empirical_conditional(const ConditionalOutcome& exact, Index draws, std::uint64_t seed,
                                                std::uint64_t stream = 0) {
  require(draws > 1, ErrorKind::InvalidArgument, "need at least two draws");
  const GaussianSampler sampler(exact.cond_mean, exact.cond_cov);
  const Index n = exact.size();
  constexpr Index kBatch = 4096;
  VectorXd sum = VectorXd::Zero(n);
  MatrixXd cross = MatrixXd::Zero(n, n);
  Index done = 0;
  std::uint64_t batch_id = 0;
  while (done < draws) {
    const Index m = std::min(kBatch, draws - done);
    // Center on the exact mean to keep the accumulated second moment well conditioned.
    MatrixXd x = sampler.sample(m, seed, (stream << 32) + batch_id++);
    x.colwise() -= exact.cond_mean;
    sum += x.rowwise().sum();
    cross.noalias() += x * x.transpose();
    done += m;
  }
  const double count = static_cast<double>(draws);
  const VectorXd centered_mean = sum / count;
  ConditionalOutcome out;
  out.theta_bar = exact.theta_bar;
  out.cond_mean = exact.cond_mean + centered_mean;
  out.cond_cov = (cross - count * centered_mean * centered_mean.transpose()) / (count - 1.0);
  out.cond_kernel_diag = out.cond_cov.diagonal();
  return out;
}

}  // namespace lqg
