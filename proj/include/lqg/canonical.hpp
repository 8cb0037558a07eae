#pragma once

// Construction of an observationally equivalent canonical structure from an
// arbitrary structure and an affine profile with nonzero slopes:
//
//   h(i)   = phi(i)^T P_theta(i) / (sigma_theta |phi(i)|)
//   g(i,j) = phi(i)^T (P(i,j) - P_theta(i) P_theta(j)^T) phi(j) / (|phi(i)| |phi(j)|)
//   phi0* = phi0,  phi1*(i) = |phi(i)|

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <utility>

#include "lqg/core.hpp"
#include "lqg/equilibrium.hpp"
#include "lqg/outcome.hpp"

namespace lqg {

struct CanonicalForm {
  CanonicalInfo info;
  AffineProfile profile;  // d = 1
};

inline CanonicalForm canonicalize(const StandardizedInfo& info, const AffineProfile& prof,
                                  double pd_tol = kDefaultTolerances.pd) {
  const Index n = info.size();
  const Index d = info.d;
  require(prof.size() == n && prof.dim() == d, ErrorKind::DimensionMismatch,
          "profile dimensions do not match the information structure");
  const double sd = info.prior.sd();

  VectorXd norms(n);
  MatrixXd units(n, d);  // phi(i) / |phi(i)|
  for (Index i = 0; i < n; ++i) {
    norms[i] = prof.phi.row(i).norm();
    if (norms[i] < pd_tol) fail(ErrorKind::ZeroSlope, "slope of agent " + std::to_string(i) + " vanishes");
    units.row(i) = prof.phi.row(i) / norms[i];
  }

  // a(i) = unit(i)^T P_theta(i) = sigma_theta h(i)
  VectorXd a(n);
  for (Index i = 0; i < n; ++i) a[i] = units.row(i).dot(info.theta_block(i));

  CanonicalForm out;
  CanonicalInfo& c = out.info;
  c.var_theta = info.prior.var;
  c.h = a / sd;
  c.g.resize(n, n);
  c.g_kernel_diag.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto ui = units.row(i);
    for (Index j = 0; j < n; ++j) {
      const double corr = ui.dot(info.kernel.block(i * d, j * d, d, d) * units.row(j).transpose());
      c.g(i, j) = corr - a[i] * a[j];
    }
    c.g_kernel_diag[i] = c.g(i, i);
    c.g(i, i) = 1.0 - c.var_theta * c.h[i] * c.h[i];
  }

  out.profile.phi0 = prof.phi0;
  out.profile.phi = norms;
  return out;
}

struct EquivalenceReport {
  double mean_gap = 0.0;
  double cov_gap = 0.0;
  double kernel_diag_gap = 0.0;
  double theta_gap = 0.0;
  bool pass = false;

  double max_gap() const { return std::max({mean_gap, cov_gap, kernel_diag_gap, theta_gap}); }
};

/// Compares the outcome moments induced by two (structure, profile) pairs.
inline EquivalenceReport verify_equivalence(const StandardizedInfo& a_info, const AffineProfile& a_prof,
                                            const StandardizedInfo& b_info, const AffineProfile& b_prof,
                                            double tol = 1e-10) {
  require(a_info.size() == b_info.size(), ErrorKind::DimensionMismatch, "structures live on different grids");
  const OutcomeMoments a = outcome_moments(a_info, a_prof);
  const OutcomeMoments b = outcome_moments(b_info, b_prof);
  EquivalenceReport r;
  r.mean_gap = (a.mean_x - b.mean_x).cwiseAbs().maxCoeff();
  r.cov_gap = (a.cov_xx - b.cov_xx).cwiseAbs().maxCoeff();
  r.kernel_diag_gap = (a.kernel_diag - b.kernel_diag).cwiseAbs().maxCoeff();
  r.theta_gap = (a.cov_xtheta - b.cov_xtheta).cwiseAbs().maxCoeff();
  r.pass = r.max_gap() <= tol;
  return r;
}

/// Infinity-norm residual of the canonical profile in the equilibrium equation
/// of the game (b, c, w, canonical structure).
inline double verify_canonical_equilibrium(const PayoffStructure& payoff, const CanonicalInfo& canon,
                                           const AffineProfile& canon_prof, const AgentGrid& grid,
                                           const Prior& prior) {
  require(canon.var_theta == prior.var, ErrorKind::InvalidArgument, "prior variance disagrees with the structure");
  const StandardizedInfo std_canon = standardize(canonical_to_info(canon, grid, prior.mu));
  return equilibrium_residual(build_operator(payoff, std_canon, grid), canon_prof);
}

}  // namespace lqg
