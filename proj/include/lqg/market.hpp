#pragma once

// Market competition under an exercise tax tau: firms face inverse demand
// (1 - tau)(theta - Y) and observe S(i) = h theta + eps(i) with i.i.d. noise.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "lqg/core.hpp"
#include "lqg/equilibrium.hpp"
#include "lqg/identification.hpp"
#include "lqg/outcome.hpp"

namespace lqg {

struct MarketScenario {
  double tau = 0.5;
  double h = 0.8;
  Index n = 100;

  void validate() const {
    require(tau >= 0.0 && tau <= 1.0, ErrorKind::InvalidArgument, "tax rate must lie in [0,1]");
    require(h >= 0.0 && h <= 1.0, ErrorKind::InvalidArgument, "exposure must lie in [0,1]");
    require(n > 0, ErrorKind::InvalidArgument, "grid size must be positive");
  }
};

inline PayoffStructure market_payoff(double tau, Index n) {
  PayoffStructure p;
  p.b = VectorXd::Constant(n, 1.0 - tau);
  p.c = VectorXd::Zero(n);
  p.w = MatrixXd::Constant(n, n, -(1.0 - tau));
  return p;
}

inline CanonicalInfo market_canonical(double h, Index n) {
  return make_canonical_info(VectorXd::Constant(n, h), MatrixXd::Zero(n, n), 1.0);
}

inline std::pair<PayoffStructure, InformationStructure> market_game(const MarketScenario& s) {
  s.validate();
  return {market_payoff(s.tau, s.n), canonical_to_info(market_canonical(s.h, s.n), AgentGrid(s.n), 0.0)};
}

inline double closed_form_slope(double tau, double h) { return (1.0 - tau) * h / (1.0 + (1.0 - tau) * h * h); }

inline double tax_revenue(double tau, double h) {
  const double den = 1.0 + (1.0 - tau) * h * h;
  return tau * (1.0 - tau) * (1.0 - tau) * h * h / (den * den);
}

/// tau times the mean action variance of the solved market game under an
/// arbitrary information structure.
inline double tax_revenue_pipeline(double tau, const InformationStructure& info, const Tolerances& tol = kDefaultTolerances) {
  const Index n = info.size();
  const AgentGrid grid(n);
  const StandardizedInfo s = standardize(info, tol.pd);
  const AffineProfile prof = solve_equilibrium(build_operator(market_payoff(tau, n), s, grid), tol);
  const OutcomeMoments mom = outcome_moments(s, prof);
  return tau * mom.cov_xx.diagonal().mean();
}

struct RevenueBound {
  double bound = 0.0;
  double r_tau = 0.0;
  double guaranteed = 0.0;  // tau (1-tau)^2 / (2-tau)^2 var_theta mean |P_theta|^2
};

inline double revenue_bound_factor(double tau) { return tau * (1.0 - tau) * (1.0 - tau) / (2.0 - tau); }

/// Factor that does bound revenue from below for every structure. The slope
/// solves (I + (1-tau) P) phi = (1-tau) sigma_theta P_theta with P between 0
/// and I, so |phi| >= (1-tau) sigma_theta |P_theta| / (2-tau) in the grid norm.
inline double guaranteed_revenue_factor(double tau) {
  const double q = (1.0 - tau) / (2.0 - tau);
  return tau * q * q;
}

inline RevenueBound revenue_lower_bound(double tau, const InformationStructure& info,
                                        double pd_tol = kDefaultTolerances.pd) {
  const StandardizedInfo s = standardize(info, pd_tol);
  const Index n = s.size();
  double mean_sq = 0.0;
  for (Index i = 0; i < n; ++i) mean_sq += s.theta_block(i).squaredNorm();
  mean_sq /= static_cast<double>(n);
  RevenueBound r;
  r.r_tau = revenue_bound_factor(tau);
  r.bound = r.r_tau * mean_sq;
  r.guaranteed = guaranteed_revenue_factor(tau) * s.prior.var * mean_sq;
  return r;
}

struct OptimalTax {
  double tau_star = 0.0;
  double revenue_star = 0.0;
  bool unimodal = true;
  bool zero_revenue = false;
};

/// Golden-section maximization of tax_revenue(., h) on [0,1] after a
/// 1001-point scan that brackets the maximizer and flags multiple local maxima.
inline OptimalTax optimal_tax(double h, double resolution = 1e-6) {
  require(resolution >= 1e-6, ErrorKind::InvalidArgument, "resolution must be at least 1e-6");
  constexpr int kScan = 1001;
  std::vector<double> vals(kScan);
  int best = 0;
  for (int k = 0; k < kScan; ++k) {
    vals[k] = tax_revenue(k / static_cast<double>(kScan - 1), h);
    if (vals[k] > vals[best]) best = k;
  }
  OptimalTax out;
  if (vals[best] <= 0.0) {
    out.zero_revenue = true;
    return out;
  }
  int peaks = 0;
  for (int k = 1; k + 1 < kScan; ++k) peaks += vals[k] > vals[k - 1] && vals[k] >= vals[k + 1];
  out.unimodal = peaks <= 1;

  auto f = [h](double t) { return tax_revenue(t, h); };
  double lo = std::max(0, best - 1) / static_cast<double>(kScan - 1);
  double hi = std::min(kScan - 1, best + 1) / static_cast<double>(kScan - 1);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > resolution) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = f(x1);
    }
  }
  out.tau_star = 0.5 * (lo + hi);
  out.revenue_star = f(out.tau_star);
  return out;
}

struct RoundTrip {
  double h_true = 0.0;
  double h_hat = 0.0;
  double h_error = 0.0;
  double tau_star = 0.0;
  double tau_star_hat = 0.0;
  double tau_error = 0.0;
  double revenue_star_hat = 0.0;
};

/// Observe the market at tax rate s.tau, identify h from two conditional
/// action distributions under positivity, and predict the revenue-maximizing
/// tax. With an exactly uninformative signal the slopes vanish and
/// identification stops at ZeroVariance.
inline RoundTrip policy_roundtrip(const MarketScenario& s, std::pair<double, double> theta_bars,
                                  const Tolerances& tol = kDefaultTolerances) {
  const auto [payoff, info] = market_game(s);
  const StandardizedInfo std_info = standardize(info, tol.pd);
  const AgentGrid grid(s.n);
  const AffineProfile prof = solve_equilibrium(build_operator(payoff, std_info, grid), tol);
  const OutcomeMoments mom = outcome_moments(std_info, prof);
  const IdentifiedCanonical idc =
      identify(condition_on_state(mom, theta_bars.first), condition_on_state(mom, theta_bars.second), info.prior,
               tol.pd);
  const SignedCanonical signed_c = resolve_signs_positive(idc);

  RoundTrip r;
  r.h_true = s.h;
  r.h_hat = signed_c.h.mean();
  r.h_error = (signed_c.h.array() - s.h).abs().maxCoeff();
  r.tau_star = optimal_tax(s.h).tau_star;
  const OptimalTax hat = optimal_tax(r.h_hat);
  r.tau_star_hat = hat.tau_star;
  r.revenue_star_hat = hat.revenue_star;
  r.tau_error = std::abs(r.tau_star_hat - r.tau_star);
  return r;
}

}  // namespace lqg
