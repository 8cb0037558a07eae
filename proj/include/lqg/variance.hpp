#pragma once

// State-variance reduction from signals and from actions, the gap between the
// two (a GLS sum of squared residuals), its tightness condition and the
// cosine-similarity ratio between a structure and its canonical form.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lqg/canonical.hpp"
#include "lqg/core.hpp"
#include "lqg/equilibrium.hpp"

namespace lqg {

/// Per-agent slope matrices Phi(i), d_s x d_x. X(i) = Phi(i)^T K(i,i)^{-1/2} S(i).
using ActionMap = std::vector<MatrixXd>;

inline ActionMap action_map(const AffineProfile& prof) {
  ActionMap out;
  out.reserve(prof.size());
  for (Index i = 0; i < prof.size(); ++i) out.push_back(prof.phi.row(i).transpose());
  return out;
}

struct GapReport {
  double r_signal = 0.0;
  double r_action = 0.0;
  double gap = 0.0;
  double ssr = 0.0;  // the same gap via the GLS residual
  bool proportional = false;
  double ls_residual = 0.0;
};

namespace detail {

struct TeamBlocks {
  MatrixXd k;          // K(N), pointwise own covariances on the diagonal
  VectorXd k_theta;    // K_theta(N)
  MatrixXd root;       // V(N)^{1/2}
  MatrixXd root_inv;   // V(N)^{-1/2}
};

inline TeamBlocks team_blocks(const InformationStructure& info, const IndexSet& team, bool roots, double pd_tol) {
  require(!team.empty(), ErrorKind::InvalidArgument, "team is empty");
  const Index d = info.d;
  const Index m = static_cast<Index>(team.size()) * d;
  TeamBlocks t;
  t.k.resize(m, m);
  t.k_theta.resize(m);
  for (std::size_t a = 0; a < team.size(); ++a) {
    const Index i = team[a];
    require(i >= 0 && i < info.size(), ErrorKind::InvalidArgument, "team member outside the grid");
    for (std::size_t b = 0; b < team.size(); ++b) t.k.block(a * d, b * d, d, d) = info.block(i, team[b]);
    t.k_theta.segment(a * d, d) = info.theta_block(i);
  }
  if (roots) {
    t.root = MatrixXd::Zero(m, m);
    t.root_inv = MatrixXd::Zero(m, m);
    for (std::size_t a = 0; a < team.size(); ++a) {
      const MatrixXd& own = info.own_cov[team[a]];
      t.root.block(a * d, a * d, d, d) =
          linalg::spd_power(own, 0.5, pd_tol, ErrorKind::SingularOwnCovariance, "own covariance");
      t.root_inv.block(a * d, a * d, d, d) =
          linalg::spd_power(own, -0.5, pd_tol, ErrorKind::SingularOwnCovariance, "own covariance");
    }
  }
  return t;
}

/// Block-diagonal Phi(N), (|N| d_s) x (|N| d_x).
inline MatrixXd stacked_actions(const InformationStructure& info, const ActionMap& amap, const IndexSet& team) {
  require(static_cast<Index>(amap.size()) == info.size(), ErrorKind::DimensionMismatch,
          "action map must cover every agent");
  const Index ds = info.d;
  const Index dx = amap[team.front()].cols();
  MatrixXd phi = MatrixXd::Zero(static_cast<Index>(team.size()) * ds, static_cast<Index>(team.size()) * dx);
  for (std::size_t a = 0; a < team.size(); ++a) {
    const MatrixXd& m = amap[team[a]];
    require(m.rows() == ds && m.cols() == dx, ErrorKind::DimensionMismatch, "action map blocks must be d_s x d_x");
    phi.block(a * ds, a * dx, ds, dx) = m;
  }
  return phi;
}

}  // namespace detail

/// r(N) = K_theta(N)^T K(N)^{-1} K_theta(N).
inline double variance_reduction_signals(const InformationStructure& info, const IndexSet& team,
                                         double pd_tol = kDefaultTolerances.pd) {
  const auto t = detail::team_blocks(info, team, false, pd_tol);
  const VectorXd y = linalg::spd_solve(t.k, t.k_theta, pd_tol, ErrorKind::SingularTeamCovariance,
                                       "team covariance is singular");
  return t.k_theta.dot(y);
}

namespace detail {

struct ActionProjection {
  TeamBlocks t;
  MatrixXd phi;        // Phi(N)
  MatrixXd phi_tilde;  // V^{-1/2} Phi(N)
  MatrixXd gram;       // Phi~^T K Phi~ = Cov(X(N))
  VectorXd cross;      // Phi~^T K_theta = Cov(X(N), theta)
};

inline ActionProjection action_projection(const InformationStructure& info, const ActionMap& amap,
                                          const IndexSet& team, double pd_tol) {
  ActionProjection p;
  p.t = team_blocks(info, team, true, pd_tol);
  p.phi = stacked_actions(info, amap, team);
  p.phi_tilde = p.t.root_inv * p.phi;
  p.gram = linalg::symmetrize(p.phi_tilde.transpose() * p.t.k * p.phi_tilde);
  p.cross = p.phi_tilde.transpose() * p.t.k_theta;
  return p;
}

inline VectorXd solve_gram(const ActionProjection& p, const VectorXd& rhs, double pd_tol) {
  return linalg::spd_solve(p.gram, rhs, pd_tol, ErrorKind::DegenerateActions,
                           "action covariance is singular; some action is degenerate");
}

}  // namespace detail

/// r^(N) = K_theta^T Phi~ (Phi~^T K Phi~)^{-1} Phi~^T K_theta.
inline double variance_reduction_actions(const InformationStructure& info, const ActionMap& amap,
                                         const IndexSet& team, double pd_tol = kDefaultTolerances.pd) {
  const auto p = detail::action_projection(info, amap, team, pd_tol);
  return p.cross.dot(detail::solve_gram(p, p.cross, pd_tol));
}

inline GapReport gap_report(const InformationStructure& info, const ActionMap& amap, const IndexSet& team,
                            double pd_tol = kDefaultTolerances.pd, double ls_tol = 1e-8) {
  const auto p = detail::action_projection(info, amap, team, pd_tol);
  GapReport r;
  const VectorXd y = linalg::spd_solve(p.t.k, p.t.k_theta, pd_tol, ErrorKind::SingularTeamCovariance,
                                       "team covariance is singular");
  r.r_signal = p.t.k_theta.dot(y);
  const VectorXd beta = detail::solve_gram(p, p.cross, pd_tol);
  r.r_action = p.cross.dot(beta);
  r.gap = r.r_signal - r.r_action;

  // GLS of y on Phi~ with weight K: the residual quadratic form is the gap.
  const VectorXd resid = y - p.phi_tilde * beta;
  r.ssr = resid.dot(p.t.k * resid);

  // Tightness: Phi(N) beta = V^{1/2} K^{-1} K_theta has an exact solution.
  const VectorXd rhs = p.t.root * y;
  const VectorXd sol = p.phi.completeOrthogonalDecomposition().solve(rhs);
  r.ls_residual = (p.phi * sol - rhs).norm();
  r.proportional = r.ls_residual <= ls_tol * (1.0 + rhs.norm());
  return r;
}

/// Structure of the agents in `team` only, in the given order.
inline StandardizedInfo restrict_info(const StandardizedInfo& s, const IndexSet& team) {
  const Index d = s.d;
  const Index m = static_cast<Index>(team.size());
  StandardizedInfo out;
  out.d = d;
  out.prior = s.prior;
  out.kernel.resize(m * d, m * d);
  out.p_theta.resize(m * d);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) out.kernel.block(a * d, b * d, d, d) = s.kernel.block(team[a] * d, team[b] * d, d, d);
    out.p_theta.segment(a * d, d) = s.theta_block(team[a]);
    out.root_inv.push_back(s.root_inv[team[a]]);
  }
  return out;
}

inline AffineProfile restrict_profile(const AffineProfile& prof, const IndexSet& team) {
  AffineProfile out;
  out.phi0.resize(static_cast<Index>(team.size()));
  out.phi.resize(static_cast<Index>(team.size()), prof.dim());
  for (std::size_t a = 0; a < team.size(); ++a) {
    out.phi0[a] = prof.phi0[team[a]];
    out.phi.row(a) = prof.phi.row(team[a]);
  }
  return out;
}

struct CosineRatio {
  double lhs = 0.0;   // r(i | canonical) / r(i | original)
  double cos2 = 0.0;  // squared cosine between phi(i) and P_theta(i)
};

inline CosineRatio cosine_ratio(const StandardizedInfo& s, const AffineProfile& prof, Index i,
                                double pd_tol = kDefaultTolerances.pd) {
  require(i >= 0 && i < s.size(), ErrorKind::InvalidArgument, "agent index outside the grid");
  const VectorXd phi = prof.phi.row(i).transpose();
  const VectorXd pt = s.theta_block(i);
  if (phi.norm() < pd_tol) fail(ErrorKind::ZeroVector, "slope of agent " + std::to_string(i) + " vanishes");
  if (pt.norm() < pd_tol) fail(ErrorKind::ZeroVector, "signal of agent " + std::to_string(i) + " is uninformative");

  const IndexSet self{i};
  const StandardizedInfo local = restrict_info(s, self);
  const CanonicalForm canon = canonicalize(local, restrict_profile(prof, self), pd_tol);
  const IndexSet first{0};
  const double r_orig = variance_reduction_signals(as_information(local), first, pd_tol);
  const double r_canon = variance_reduction_signals(canonical_to_info(canon.info, AgentGrid(1)), first, pd_tol);

  CosineRatio out;
  out.lhs = r_canon / r_orig;
  const double dot = phi.dot(pt);
  out.cos2 = dot * dot / (phi.squaredNorm() * pt.squaredNorm());
  return out;
}

// ---------------------------------------------------------------------------
// Games in which agent i's slope is forced onto P_theta(i)

enum class ZeroHypothesis { ZeroB, ZeroRowW, ZeroPTheta, ZeroRowP };

constexpr const char* to_string(ZeroHypothesis z) {
  switch (z) {
    case ZeroHypothesis::ZeroB: return "b-vanishes-off-i";
    case ZeroHypothesis::ZeroRowW: return "w-row-i-vanishes";
    case ZeroHypothesis::ZeroPTheta: return "p-theta-vanishes-off-i";
    case ZeroHypothesis::ZeroRowP: return "p-row-i-vanishes";
  }
  return "unknown";
}

struct ZeroCase {
  ZeroHypothesis hypothesis;
  VectorXd phi_i;
  double lambda = 0.0;    // least-squares lambda in lambda phi(i) = P_theta(i)
  double residual = 0.0;  // || lambda phi(i) - P_theta(i) ||
};

/// Builds the four modified games, solves each and measures how far phi(i) is
/// from being proportional to P_theta(i). On the grid agent i carries weight
/// 1/n, while in the continuum it has none; its column of w is zeroed so that
/// its own slope does not feed back into the other agents.
inline std::vector<ZeroCase> corollary_zero_cases(const PayoffStructure& payoff, const InformationStructure& info,
                                                  const AgentGrid& grid, Index i,
                                                  const Tolerances& tol = kDefaultTolerances) {
  const Index n = grid.size();
  require(i >= 0 && i < n, ErrorKind::InvalidArgument, "agent index outside the grid");
  require(payoff.b[i] != 0.0, ErrorKind::InvalidArgument, "b(i) must be nonzero");
  const StandardizedInfo base = standardize(info, tol.pd);
  const Index d = base.d;

  std::vector<ZeroCase> out;
  for (ZeroHypothesis z : {ZeroHypothesis::ZeroB, ZeroHypothesis::ZeroRowW, ZeroHypothesis::ZeroPTheta,
                           ZeroHypothesis::ZeroRowP}) {
    PayoffStructure pay = payoff;
    StandardizedInfo s = base;
    pay.w.col(i).setZero();
    switch (z) {
      case ZeroHypothesis::ZeroB:
        for (Index j = 0; j < n; ++j)
          if (j != i) pay.b[j] = 0.0;
        break;
      case ZeroHypothesis::ZeroRowW:
        pay.w.row(i).setZero();
        break;
      case ZeroHypothesis::ZeroPTheta:
        for (Index j = 0; j < n; ++j)
          if (j != i) s.p_theta.segment(j * d, d).setZero();
        break;
      case ZeroHypothesis::ZeroRowP:
        s.kernel.middleRows(i * d, d).setZero();
        s.kernel.middleCols(i * d, d).setZero();
        break;
    }
    const AffineProfile prof = solve_equilibrium(build_operator(pay, s, grid), tol);
    ZeroCase zc;
    zc.hypothesis = z;
    zc.phi_i = prof.phi.row(i).transpose();
    const VectorXd pt = s.theta_block(i);
    const double nn = zc.phi_i.squaredNorm();
    zc.lambda = nn > 0.0 ? zc.phi_i.dot(pt) / nn : 0.0;
    zc.residual = (zc.lambda * zc.phi_i - pt).norm();
    out.push_back(std::move(zc));
  }
  return out;
}

}  // namespace lqg
