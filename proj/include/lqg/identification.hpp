#pragma once

// Recovery of a canonical structure from the action distributions observed at
// two distinct state realizations, and identification of higher-order
// uncertainty along team paths.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lqg/core.hpp"
#include "lqg/outcome.hpp"

namespace lqg {

/// What two conditional action distributions pin down about the canonical
/// structure. Magnitudes are identified; the cross terms are identified with
/// their signs.
struct IdentifiedCanonical {
  VectorXd phi0;        // phi0*
  VectorXd abs_phi1;    // |phi1*|
  VectorXd abs_h;       // |h|
  MatrixXd abs_g;       // |g(i,j)| off the diagonal, signed g(i,i) on it
  VectorXd cross_phih;  // phi1*(i) h(i)
  MatrixXd cross_phig;  // phi1*(i) phi1*(j) g(i,j)
  double var_theta = 1.0;

  Index size() const { return phi0.size(); }
};

/// Identification stages, used to label failures.
enum class IdentificationStep { Intercept, ConditionalCovariance, CrossMoment, SlopeMagnitude, Exposure };

constexpr const char* to_string(IdentificationStep s) {
  switch (s) {
    case IdentificationStep::Intercept: return "intercept";
    case IdentificationStep::ConditionalCovariance: return "conditional-covariance";
    case IdentificationStep::CrossMoment: return "cross-moment";
    case IdentificationStep::SlopeMagnitude: return "slope-magnitude";
    case IdentificationStep::Exposure: return "exposure";
  }
  return "unknown";
}

class IdentificationError : public Error {
 public:
  IdentificationError(ErrorKind kind, IdentificationStep step, const std::string& what)
      : Error(kind, std::string("[step ") + to_string(step) + "] " + what), step_(step) {}
  IdentificationStep step() const noexcept { return step_; }

 private:
  IdentificationStep step_;
};

inline IdentifiedCanonical identify(const ConditionalOutcome& cond1, const ConditionalOutcome& cond2,
                                    const Prior& prior, double pd_tol = kDefaultTolerances.pd) {
  const Index n = cond1.size();
  require(cond2.size() == n, ErrorKind::DimensionMismatch, "conditional distributions disagree on n");
  require(prior.var > 0.0, ErrorKind::InvalidArgument, "state variance must be positive");
  const double t1 = cond1.theta_bar;
  const double t2 = cond2.theta_bar;
  const double delta = t1 - t2;
  if (std::abs(delta) < 1e-12) {
    throw IdentificationError(ErrorKind::DegenerateStates, IdentificationStep::Intercept,
                              "conditioning states must be distinct");
  }

  IdentifiedCanonical out;
  out.var_theta = prior.var;

  // Intercepts: E[X | t] = phi0 + (phi1 h)(t - mu).
  const double e1 = t1 - prior.mu;
  const double e2 = t2 - prior.mu;
  if (std::abs(e1) < 1e-10) {
    out.phi0 = cond1.cond_mean;
  } else if (std::abs(e2) < 1e-10) {
    out.phi0 = cond2.cond_mean;
  } else {
    out.phi0 = (cond1.cond_mean / e1 - cond2.cond_mean / e2) / (1.0 / e1 - 1.0 / e2);
  }

  // Regression coefficient of actions on the state.
  const VectorXd mean_shift = cond2.cond_mean - cond1.cond_mean;
  out.cross_phih = -mean_shift / delta;

  // Covariance conditional on t1: phi1 phi1 g.
  out.cross_phig = linalg::symmetrize(cond1.cond_cov);

  // Second moment at t2 around the t1 conditional mean: phi1 phi1 (h h delta^2 + g).
  const MatrixXd shifted = cond2.cond_cov + mean_shift * mean_shift.transpose();
  const MatrixXd phih_products = (shifted - out.cross_phig) / (delta * delta);

  out.abs_phi1.resize(n);
  out.abs_h.resize(n);
  out.abs_g.resize(n, n);
  VectorXd g_diag(n);
  for (Index i = 0; i < n; ++i) {
    const double slope_sq = shifted(i, i) + (prior.var - delta * delta) * phih_products(i, i);
    if (std::abs(slope_sq) < pd_tol) {
      throw IdentificationError(ErrorKind::ZeroVariance, IdentificationStep::SlopeMagnitude,
                                "action of agent " + std::to_string(i) + " has zero variance");
    }
    if (slope_sq < 0.0) {
      throw IdentificationError(ErrorKind::InconsistentInput, IdentificationStep::SlopeMagnitude,
                                "squared slope of agent " + std::to_string(i) + " is negative");
    }
    out.abs_phi1[i] = std::sqrt(slope_sq);
    g_diag[i] = out.cross_phig(i, i) / slope_sq;
    if (g_diag[i] < -pd_tol) {
      throw IdentificationError(ErrorKind::InconsistentInput, IdentificationStep::ConditionalCovariance,
                                "idiosyncratic variance of agent " + std::to_string(i) + " is negative");
    }
    const double h_sq = (1.0 - g_diag[i]) / prior.var;
    if (h_sq < -pd_tol) {
      throw IdentificationError(ErrorKind::InconsistentInput, IdentificationStep::Exposure,
                                "squared exposure of agent " + std::to_string(i) + " is negative");
    }
    out.abs_h[i] = std::sqrt(std::max(h_sq, 0.0));
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      out.abs_g(i, j) = i == j ? g_diag[i] : std::abs(out.cross_phig(i, j)) / (out.abs_phi1[i] * out.abs_phi1[j]);
    }
  }
  return out;
}

struct SignedCanonical {
  VectorXd h;
  MatrixXd g;
  VectorXd phi1;
};

/// Point identification under the hypothesis h >= 0.
inline SignedCanonical resolve_signs_positive(const IdentifiedCanonical& idc, double zero_tol = 1e-10) {
  const Index n = idc.size();
  SignedCanonical out;
  out.h = idc.abs_h;
  out.phi1.resize(n);
  for (Index i = 0; i < n; ++i) {
    if (idc.abs_h[i] < zero_tol) {
      throw IdentificationError(ErrorKind::ZeroExposure, IdentificationStep::Exposure,
                                "exposure of agent " + std::to_string(i) + " is zero; slope sign is not identified");
    }
    out.phi1[i] = idc.cross_phih[i] / out.h[i];
  }
  out.g = idc.cross_phig.array() / (out.phi1 * out.phi1.transpose()).array();
  return out;
}

/// Wraps a known canonical structure so that the team formulas can be
/// evaluated on ground truth (unit slopes, D = I).
inline IdentifiedCanonical identified_from_truth(const CanonicalInfo& c) {
  const Index n = c.size();
  IdentifiedCanonical out;
  out.var_theta = c.var_theta;
  out.phi0 = VectorXd::Zero(n);
  out.abs_phi1 = VectorXd::Ones(n);
  out.abs_h = c.h.cwiseAbs();
  out.abs_g = c.g.cwiseAbs();
  out.abs_g.diagonal() = c.g.diagonal();
  out.cross_phih = c.h;
  out.cross_phig = c.g;
  return out;
}

/// A path of teams N_1, ..., N_p.
using TeamPath = std::vector<IndexSet>;

namespace detail {

inline void check_path(const TeamPath& teams, Index n) {
  require(!teams.empty(), ErrorKind::InvalidArgument, "team path is empty");
  for (const auto& team : teams) {
    require(!team.empty() && team.size() <= 12, ErrorKind::InvalidArgument, "teams must have 1 to 12 agents");
    for (Index i : team) require(i >= 0 && i < n, ErrorKind::InvalidArgument, "team member outside the grid");
  }
}

}  // namespace detail

/// R_p(N_1; N_2, ..., N_p) computed only from identified cross terms: the
/// slope-conjugated team covariances D_p A_{p,q} D_q and vectors D_p b_p.
inline double higher_order_uncertainty(const IdentifiedCanonical& idc, const TeamPath& teams,
                                       double pd_tol = kDefaultTolerances.pd) {
  detail::check_path(teams, idc.size());
  const double var = idc.var_theta;
  auto conj_cov = [&](const IndexSet& p, const IndexSet& q) {
    MatrixXd m(p.size(), q.size());
    for (std::size_t a = 0; a < p.size(); ++a)
      for (std::size_t b = 0; b < q.size(); ++b)
        m(a, b) = var * idc.cross_phih[p[a]] * idc.cross_phih[q[b]] + idc.cross_phig(p[a], q[b]);
    return m;
  };
  auto conj_theta = [&](const IndexSet& p) {
    VectorXd v(p.size());
    for (std::size_t a = 0; a < p.size(); ++a) v[a] = var * idc.cross_phih[p[a]];
    return v;
  };
  auto solve = [&](const IndexSet& team, const VectorXd& rhs) -> VectorXd {
    return linalg::spd_solve(conj_cov(team, team), rhs, pd_tol, ErrorKind::SingularTeamCovariance,
                             "team covariance is singular");
  };

  const std::size_t p = teams.size();
  if (p == 1) {
    const VectorXd db = conj_theta(teams[0]);
    return var - db.dot(solve(teams[0], db));
  }
  // D_q c_{q:p}, from q = p down to q = 1.
  std::vector<VectorXd> dc(p);
  dc[p - 1] = conj_theta(teams[p - 1]);
  for (std::size_t q = p - 1; q-- > 0;) {
    dc[q] = conj_cov(teams[q], teams[q + 1]) * solve(teams[q + 1], dc[q + 1]);
  }
  return dc[1].dot(solve(teams[1], dc[1])) - dc[0].dot(solve(teams[0], dc[0]));
}

inline double higher_order_uncertainty(const CanonicalInfo& truth, const TeamPath& teams,
                                       double pd_tol = kDefaultTolerances.pd) {
  return higher_order_uncertainty(identified_from_truth(truth), teams, pd_tol);
}

/// Independent route from raw covariances: composes the conditional
/// expectations E_{N_2} ... E_{N_p}[theta] as a linear statistic of the N_2
/// signals and takes its variance conditional on the N_1 signals.
inline double nested_projection_oracle(const InformationStructure& info, const TeamPath& teams,
                                       double pd_tol = kDefaultTolerances.pd) {
  detail::check_path(teams, info.size());
  const Index d = info.d;
  auto cov = [&](const IndexSet& p, const IndexSet& q) {
    MatrixXd m(p.size() * d, q.size() * d);
    for (std::size_t a = 0; a < p.size(); ++a)
      for (std::size_t b = 0; b < q.size(); ++b) m.block(a * d, b * d, d, d) = info.block(p[a], q[b]);
    return m;
  };
  auto theta_cov = [&](const IndexSet& p) {
    VectorXd v(p.size() * d);
    for (std::size_t a = 0; a < p.size(); ++a) v.segment(a * d, d) = info.theta_block(p[a]);
    return v;
  };
  auto inv_apply = [&](const IndexSet& team, const MatrixXd& rhs) -> MatrixXd {
    return linalg::spd_solve(cov(team, team), rhs, pd_tol, ErrorKind::SingularTeamCovariance,
                             "team covariance is singular");
  };

  const std::size_t p = teams.size();
  const VectorXd bp = theta_cov(teams[p - 1]);
  if (p == 1) return info.prior.var - bp.dot(inv_apply(teams[0], bp).col(0));

  // Coefficients of E_{N_q} ... E_{N_p}[theta] on S(N_q).
  VectorXd coef = inv_apply(teams[p - 1], bp);
  for (std::size_t q = p - 1; q-- > 1;) {
    coef = inv_apply(teams[q], cov(teams[q], teams[q + 1]) * coef);
  }
  const MatrixXd a2 = cov(teams[1], teams[1]);
  const MatrixXd a21 = cov(teams[1], teams[0]);
  const MatrixXd cond = a2 - a21 * inv_apply(teams[0], a21.transpose());
  return coef.dot(cond * coef);
}

}  // namespace lqg
