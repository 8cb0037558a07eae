#pragma once

// Domain types for heterogeneous linear-quadratic-Gaussian games on a
// discretized agent continuum.
//
// Conventions used throughout:
//  * Agents sit on a uniform midpoint grid of [0,1]; every integral over
//    agents becomes a sum weighted by 1/n.
//  * Covariances of multi-dimensional signals are stored as one flat
//    (n*d x n*d) kernel matrix whose (i,j) block is K(i,j). The diagonal
//    blocks of that matrix hold the almost-everywhere extension of the kernel
//    (what an integral operator sees), while the own covariance K(i,i) of a
//    single agent is stored separately. The two differ whenever signals carry
//    agent-specific noise.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lqg/error.hpp"
#include "lqg/linalg.hpp"
#include "lqg/tolerances.hpp"

namespace lqg {

class AgentGrid {
 public:
  explicit AgentGrid(Index n) : n_(n) {
    require(n > 0, ErrorKind::InvalidArgument, "grid size must be positive");
    points_.resize(n);
    for (Index k = 0; k < n; ++k) points_[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
  }

  Index size() const { return n_; }
  double weight() const { return 1.0 / static_cast<double>(n_); }
  const VectorXd& points() const { return points_; }
  double point(Index k) const { return points_[k]; }

 private:
  Index n_;
  VectorXd points_;
};

struct Prior {
  double mu = 0.0;
  double var = 1.0;

  double sd() const { return std::sqrt(var); }
};

/// Payoff primitives (b, c, w): responsiveness to the state, constant term and
/// the interaction kernel w(i,j).
struct PayoffStructure {
  VectorXd b;
  VectorXd c;
  MatrixXd w;

  Index size() const { return b.size(); }

  void validate() const {
    const Index n = b.size();
    require(c.size() == n && w.rows() == n && w.cols() == n, ErrorKind::DimensionMismatch,
            "payoff vectors and kernel must share the grid size");
    require(b.allFinite() && c.allFinite() && w.allFinite(), ErrorKind::InvalidArgument,
            "payoff entries must be finite");
  }
};

struct InformationStructure {
  Index d = 1;
  Prior prior;
  MatrixXd means;                 // n x d, row i is m(i)
  std::vector<MatrixXd> own_cov;  // K(i,i), d x d each
  MatrixXd kernel;                // n*d x n*d, block (i,j) is K(i,j)
  VectorXd k_theta;               // n*d, block i is Cov(S(i), theta)

  Index size() const { return static_cast<Index>(own_cov.size()); }

  /// Covariance between two agents' signals as random variables (own
  /// covariance on the diagonal).
  MatrixXd block(Index i, Index j) const {
    if (i == j) return own_cov[i];
    return kernel.block(i * d, j * d, d, d);
  }

  auto theta_block(Index i) const { return k_theta.segment(i * d, d); }

  void validate() const {
    const Index n = size();
    require(d > 0 && n > 0, ErrorKind::DimensionMismatch, "empty information structure");
    require(prior.var > 0.0, ErrorKind::InvalidArgument, "state variance must be positive");
    require(means.rows() == n && means.cols() == d, ErrorKind::DimensionMismatch, "means must be n x d");
    require(kernel.rows() == n * d && kernel.cols() == n * d, ErrorKind::DimensionMismatch,
            "kernel must be (n*d) x (n*d)");
    require(k_theta.size() == n * d, ErrorKind::DimensionMismatch, "state covariance must have n*d entries");
    for (const auto& k : own_cov) {
      require(k.rows() == d && k.cols() == d, ErrorKind::DimensionMismatch, "own covariance must be d x d");
    }
    const double scale = 1.0 + kernel.cwiseAbs().maxCoeff();
    require((kernel - kernel.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorKind::InvalidArgument,
            "kernel must satisfy K(i,j) = K(j,i)^T");
  }
};

/// Covariances rescaled by the inverse roots of the own covariances: P(i,j) and
/// P_theta(i). The pointwise P(i,i) is the identity.
struct StandardizedInfo {
  Index d = 1;
  Prior prior;
  MatrixXd kernel;                 // n*d x n*d, P(i,j); diagonal blocks hold the kernel extension
  VectorXd p_theta;                // n*d
  std::vector<MatrixXd> root_inv;  // K(i,i)^{-1/2}

  Index size() const { return static_cast<Index>(root_inv.size()); }

  MatrixXd block(Index i, Index j) const {
    if (i == j) return MatrixXd::Identity(d, d);
    return kernel.block(i * d, j * d, d, d);
  }

  auto theta_block(Index i) const { return p_theta.segment(i * d, d); }
};

/// Canonical structure S*(i) = h(i) theta + eps(i) with unit-variance signals.
/// `g` holds pointwise values (g(i,i) = 1 - h(i)^2 var_theta), `g_kernel_diag`
/// holds the kernel extension on the diagonal used inside integral operators.
struct CanonicalInfo {
  VectorXd h;
  MatrixXd g;
  VectorXd g_kernel_diag;
  double var_theta = 1.0;

  Index size() const { return h.size(); }
};

/// Affine strategy profile: X(i) = phi0(i) + phi(i)^T K(i,i)^{-1/2} (S(i) - m(i)).
struct AffineProfile {
  VectorXd phi0;  // n
  MatrixXd phi;   // n x d, row i is phi(i)

  Index size() const { return phi0.size(); }
  Index dim() const { return phi.cols(); }
};

/// Flat slope vector (n*d) <-> row-per-agent matrix (n x d).
inline VectorXd flatten_slopes(const MatrixXd& phi) {
  VectorXd out(phi.size());
  for (Index i = 0; i < phi.rows(); ++i) out.segment(i * phi.cols(), phi.cols()) = phi.row(i).transpose();
  return out;
}

inline MatrixXd unflatten_slopes(const VectorXd& flat, Index d) {
  const Index n = flat.size() / d;
  MatrixXd phi(n, d);
  for (Index i = 0; i < n; ++i) phi.row(i) = flat.segment(i * d, d).transpose();
  return phi;
}

// ---------------------------------------------------------------------------
// PSD validation

/// Joint covariance of (S(i_1), ..., S(i_k), theta) in that order.
inline MatrixXd joint_covariance(const InformationStructure& info, const IndexSet& subset) {
  const Index d = info.d;
  const Index k = static_cast<Index>(subset.size());
  MatrixXd joint(k * d + 1, k * d + 1);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) joint.block(a * d, b * d, d, d) = info.block(subset[a], subset[b]);
    joint.block(a * d, k * d, d, 1) = info.theta_block(subset[a]);
    joint.block(k * d, a * d, 1, d) = info.theta_block(subset[a]).transpose();
  }
  joint(k * d, k * d) = info.prior.var;
  return joint;
}

struct SubsetCheck {
  IndexSet subset;
  double min_eigenvalue = 0.0;
};

struct PsdReport {
  std::vector<SubsetCheck> checks;
  std::vector<SubsetCheck> failures;
  bool pass = true;
};

/// All singletons, all adjacent pairs, plus `random_count` random subsets of
/// size 2..max_size drawn with a fixed seed.
inline std::vector<IndexSet> default_psd_subsets(Index n, std::uint64_t seed = 20240611, int random_count = 64,
                                                 Index max_size = 6) {
  std::vector<IndexSet> out;
  for (Index i = 0; i < n; ++i) out.push_back({i});
  for (Index i = 0; i + 1 < n; ++i) out.push_back({i, i + 1});
  if (n < 2) return out;
  std::mt19937_64 rng(seed);
  std::vector<Index> pool(n);
  for (Index i = 0; i < n; ++i) pool[i] = i;
  std::uniform_int_distribution<Index> size_dist(2, std::min(max_size, n));
  for (int r = 0; r < random_count; ++r) {
    const Index k = size_dist(rng);
    for (Index a = 0; a < k; ++a) {
      std::uniform_int_distribution<Index> pick(a, n - 1);
      std::swap(pool[a], pool[pick(rng)]);
    }
    IndexSet subset(pool.begin(), pool.begin() + k);
    std::sort(subset.begin(), subset.end());
    out.push_back(std::move(subset));
  }
  return out;
}

inline PsdReport validate_joint_psd(const InformationStructure& info, const std::vector<IndexSet>& subsets,
                                    double psd_tol = kDefaultTolerances.psd) {
  require(!subsets.empty(), ErrorKind::InvalidArgument, "no subsets to validate");
  PsdReport report;
  for (const auto& subset : subsets) {
    require(!subset.empty() && subset.size() <= 12, ErrorKind::InvalidArgument,
            "PSD subsets must have between 1 and 12 agents");
    SubsetCheck check{subset, linalg::min_eigenvalue(joint_covariance(info, subset))};
    if (check.min_eigenvalue < -psd_tol) {
      report.pass = false;
      report.failures.push_back(check);
    }
    report.checks.push_back(std::move(check));
  }
  return report;
}

/// Full (n*d+1) joint matrix check; expensive for large grids.
inline double joint_min_eigenvalue_full(const InformationStructure& info) {
  IndexSet all(info.size());
  for (Index i = 0; i < info.size(); ++i) all[i] = i;
  return linalg::min_eigenvalue(joint_covariance(info, all));
}

// ---------------------------------------------------------------------------
// Canonical structures

inline CanonicalInfo make_canonical_info(const VectorXd& h, const MatrixXd& g_offdiag, double var_theta,
                                         const VectorXd& g_kernel_diag = VectorXd(),
                                         double psd_tol = kDefaultTolerances.psd) {
  const Index n = h.size();
  require(n > 0, ErrorKind::DimensionMismatch, "exposure vector is empty");
  require(g_offdiag.rows() == n && g_offdiag.cols() == n, ErrorKind::DimensionMismatch,
          "idiosyncratic kernel must be n x n");
  require(var_theta > 0.0, ErrorKind::InvalidArgument, "state variance must be positive");
  require(g_kernel_diag.size() == 0 || g_kernel_diag.size() == n, ErrorKind::DimensionMismatch,
          "kernel diagonal must have n entries");
  const double scale = 1.0 + g_offdiag.cwiseAbs().maxCoeff();
  require((g_offdiag - g_offdiag.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorKind::InvalidArgument,
          "idiosyncratic kernel must be symmetric");

  CanonicalInfo c;
  c.h = h;
  c.var_theta = var_theta;
  c.g = g_offdiag;
  c.g_kernel_diag = g_kernel_diag.size() ? g_kernel_diag : VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const double common = h[i] * h[i] * var_theta;
    if (common > 1.0) {
      fail(ErrorKind::NormalizationInfeasible,
           "h(" + std::to_string(i) + ")^2 var_theta = " + format_number(common) + " exceeds 1");
    }
    c.g(i, i) = 1.0 - common;
  }

  // Joint (S*(N), theta) covariance on sampled subsets.
  for (const auto& subset : default_psd_subsets(n)) {
    const Index k = static_cast<Index>(subset.size());
    MatrixXd joint(k + 1, k + 1);
    for (Index a = 0; a < k; ++a) {
      for (Index b = 0; b < k; ++b) {
        joint(a, b) = var_theta * h[subset[a]] * h[subset[b]] + c.g(subset[a], subset[b]);
      }
      joint(a, k) = joint(k, a) = var_theta * h[subset[a]];
    }
    joint(k, k) = var_theta;
    const double lam = linalg::min_eigenvalue(joint);
    if (lam < -psd_tol) {
      fail(ErrorKind::NotPSD, "canonical joint covariance has eigenvalue " + format_number(lam));
    }
  }
  return c;
}

inline InformationStructure canonical_to_info(const CanonicalInfo& c, const AgentGrid& grid, double mu_theta = 0.0) {
  const Index n = c.size();
  require(grid.size() == n, ErrorKind::DimensionMismatch, "grid and canonical structure disagree on n");
  InformationStructure info;
  info.d = 1;
  info.prior = {mu_theta, c.var_theta};
  info.means = c.h * mu_theta;
  info.own_cov.assign(n, MatrixXd::Ones(1, 1));
  info.kernel = c.var_theta * c.h * c.h.transpose() + c.g;
  for (Index i = 0; i < n; ++i) info.kernel(i, i) = c.var_theta * c.h[i] * c.h[i] + c.g_kernel_diag[i];
  info.k_theta = c.h * c.var_theta;
  return info;
}

// ---------------------------------------------------------------------------
// Standardization

inline StandardizedInfo standardize(const InformationStructure& info, double pd_tol = kDefaultTolerances.pd) {
  info.validate();
  const Index n = info.size();
  const Index d = info.d;
  StandardizedInfo s;
  s.d = d;
  s.prior = info.prior;
  s.root_inv.reserve(n);
  for (Index i = 0; i < n; ++i) {
    s.root_inv.push_back(linalg::spd_power(info.own_cov[i], -0.5, pd_tol, ErrorKind::SingularOwnCovariance,
                                           "own covariance of agent " + std::to_string(i)));
  }
  s.kernel.resize(n * d, n * d);
  s.p_theta.resize(n * d);
  const double inv_sd = 1.0 / info.prior.sd();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      s.kernel.block(i * d, j * d, d, d) = s.root_inv[i] * info.kernel.block(i * d, j * d, d, d) * s.root_inv[j];
    }
    s.p_theta.segment(i * d, d) = inv_sd * s.root_inv[i] * info.theta_block(i);
  }
  return s;
}

/// Re-reads standardized blocks as an information structure whose signals are
/// the standardized signals themselves (own covariance = identity, zero means).
inline InformationStructure as_information(const StandardizedInfo& s) {
  const Index n = s.size();
  InformationStructure info;
  info.d = s.d;
  info.prior = s.prior;
  info.means = MatrixXd::Zero(n, s.d);
  info.own_cov.assign(n, MatrixXd::Identity(s.d, s.d));
  info.kernel = s.kernel;
  info.k_theta = s.p_theta * s.prior.sd();
  return info;
}

}  // namespace lqg
