#pragma once

// Nystrom discretization of the affine-equilibrium integral equation
//
//   phi0(i) = int w(i,j) phi0(j) dj + mu_theta b(i) + c(i)
//   phi(i)  = int w(i,j) P(i,j) phi(j) dj + sigma_theta b(i) P_theta(i)
//
// The intercept and slope rows never mix, so the discrete system is kept as two
// independent blocks: (I - T0) phi0 = f0 and (I - T1) phi = f1.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "lqg/core.hpp"

namespace lqg {

struct DiscreteOperator {
  Index d = 1;
  MatrixXd t0;  // n x n
  MatrixXd t1;  // n*d x n*d
  VectorXd f0;  // n
  VectorXd f1;  // n*d

  Index size() const { return t0.rows(); }
};

struct WellPosedness {
  Eigen::VectorXcd spectrum0;
  Eigen::VectorXcd spectrum1;
  double dist_to_one = std::numeric_limits<double>::infinity();
  bool well_posed = true;
};

inline DiscreteOperator build_operator(const PayoffStructure& payoff, const StandardizedInfo& info,
                                       const AgentGrid& grid) {
  payoff.validate();
  const Index n = grid.size();
  const Index d = info.d;
  require(payoff.size() == n && info.size() == n, ErrorKind::DimensionMismatch,
          "payoff, information structure and grid must share n");
  require(info.kernel.rows() == n * d && info.p_theta.size() == n * d, ErrorKind::DimensionMismatch,
          "standardized blocks do not match n*d");

  const double wt = grid.weight();
  DiscreteOperator op;
  op.d = d;
  op.t0 = payoff.w * wt;
  op.t1.resize(n * d, n * d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      op.t1.block(i * d, j * d, d, d) = (payoff.w(i, j) * wt) * info.kernel.block(i * d, j * d, d, d);
    }
  }
  op.f0 = info.prior.mu * payoff.b + payoff.c;
  op.f1.resize(n * d);
  const double sd = info.prior.sd();
  for (Index i = 0; i < n; ++i) op.f1.segment(i * d, d) = (sd * payoff.b[i]) * info.theta_block(i);
  return op;
}

inline WellPosedness spectral_check(const DiscreteOperator& op, double spec_tol = kDefaultTolerances.spectral) {
  WellPosedness wp;
  auto spectrum = [](const MatrixXd& m) -> Eigen::VectorXcd {
    if (m.size() == 0) return {};
    Eigen::EigenSolver<MatrixXd> es(m, false);
    require(es.info() == Eigen::Success, ErrorKind::InvalidArgument, "eigenvalue iteration did not converge");
    return es.eigenvalues();
  };
  wp.spectrum0 = spectrum(op.t0);
  wp.spectrum1 = spectrum(op.t1);
  for (const auto* s : {&wp.spectrum0, &wp.spectrum1}) {
    for (Index k = 0; k < s->size(); ++k) wp.dist_to_one = std::min(wp.dist_to_one, std::abs((*s)[k] - 1.0));
  }
  wp.well_posed = wp.dist_to_one > spec_tol;
  return wp;
}

/// Row-wise residual (I - T) phi - f over both blocks, infinity norm.
inline double equilibrium_residual(const DiscreteOperator& op, const AffineProfile& prof) {
  const VectorXd slopes = flatten_slopes(prof.phi);
  const double r0 = (prof.phi0 - op.t0 * prof.phi0 - op.f0).cwiseAbs().maxCoeff();
  const double r1 = (slopes - op.t1 * slopes - op.f1).cwiseAbs().maxCoeff();
  return std::max(r0, r1);
}

namespace detail {

inline VectorXd solve_block(const MatrixXd& t, const VectorXd& f, double rel_tol) {
  const Index m = t.rows();
  const MatrixXd a = MatrixXd::Identity(m, m) - t;
  Eigen::PartialPivLU<MatrixXd> lu(a);
  VectorXd x = lu.solve(f);
  const double target = rel_tol * (1.0 + f.cwiseAbs().maxCoeff());
  for (int refine = 0; refine < 3; ++refine) {
    const VectorXd r = f - a * x;
    if (r.cwiseAbs().maxCoeff() <= target) return x;
    x += lu.solve(r);
  }
  if ((f - a * x).cwiseAbs().maxCoeff() > target) {
    fail(ErrorKind::SingularSystem, "linear solve did not reach the residual target; system is ill-conditioned");
  }
  return x;
}

}  // namespace detail

/// Direct dense solve of (I - T) phi = f. Raises SingularSystem when 1 lies
/// within the spectral tolerance of either block's spectrum.
inline AffineProfile solve_equilibrium(const DiscreteOperator& op, const WellPosedness& wp,
                                       const Tolerances& tol = kDefaultTolerances) {
  if (!wp.well_posed) {
    fail(ErrorKind::SingularSystem,
         "1 is within " + format_number(wp.dist_to_one) + " of the operator spectrum");
  }
  AffineProfile prof;
  prof.phi0 = detail::solve_block(op.t0, op.f0, tol.residual);
  prof.phi = unflatten_slopes(detail::solve_block(op.t1, op.f1, tol.residual), op.d);
  return prof;
}

inline AffineProfile solve_equilibrium(const DiscreteOperator& op, const Tolerances& tol = kDefaultTolerances) {
  return solve_equilibrium(op, spectral_check(op, tol.spectral), tol);
}

/// Damped fixed-point iteration phi <- (1-a) phi + a (T phi + f). Only
/// converges when the spectrum of the damped map lies inside the unit disc;
/// used as an independent cross-check of the direct solve.
inline AffineProfile solve_equilibrium_fixed_point(const DiscreteOperator& op, double damping = 1.0,
                                                   double tol = 1e-14, int max_iter = 100000) {
  auto iterate = [&](const MatrixXd& t, const VectorXd& f) {
    VectorXd x = VectorXd::Zero(f.size());
    for (int it = 0; it < max_iter; ++it) {
      VectorXd next = (1.0 - damping) * x + damping * (t * x + f);
      if (!next.allFinite()) fail(ErrorKind::SingularSystem, "fixed-point iteration diverged");
      const double step = (next - x).cwiseAbs().maxCoeff();
      x = std::move(next);
      if (step <= tol * (1.0 + x.cwiseAbs().maxCoeff())) return x;
    }
    fail(ErrorKind::SingularSystem, "fixed-point iteration did not converge");
  };
  AffineProfile prof;
  prof.phi0 = iterate(op.t0, op.f0);
  prof.phi = unflatten_slopes(iterate(op.t1, op.f1), op.d);
  return prof;
}

/// Diagnostics for a knife-edge system where 1 is an eigenvalue: the
/// least-squares residual of (I - T) x = f and the nullspace dimension of I - T.
/// A positive residual means no solution; a zero residual with a nontrivial
/// nullspace means a continuum of solutions.
struct KnifeEdge {
  double ls_residual = 0.0;
  Index nullity = 0;
  VectorXd particular;
  MatrixXd nullspace;
};

inline KnifeEdge analyze_knife_edge(const MatrixXd& t, const VectorXd& f, double rank_tol = 1e-9) {
  const Index m = t.rows();
  const MatrixXd a = MatrixXd::Identity(m, m) - t;
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  svd.setThreshold(rank_tol);
  KnifeEdge out;
  out.particular = svd.solve(f);
  out.ls_residual = (a * out.particular - f).norm();
  const Index rank = svd.rank();
  out.nullity = m - rank;
  out.nullspace = svd.matrixV().rightCols(out.nullity);
  return out;
}

inline PayoffStructure regularize_weights(const PayoffStructure& payoff, double eps) {
  require(eps > 0.0 && eps < 1.0, ErrorKind::InvalidArgument, "regularization eps must lie in (0,1)");
  PayoffStructure out = payoff;
  out.w *= (1.0 - eps);
  return out;
}

/// L2 norm of a grid function with uniform weights.
inline double grid_l2(const MatrixXd& values, double weight) { return std::sqrt(weight * values.squaredNorm()); }

inline double profile_distance(const AffineProfile& a, const AffineProfile& b, double weight) {
  return std::sqrt(weight * ((a.phi0 - b.phi0).squaredNorm() + (a.phi - b.phi).squaredNorm()));
}

struct PerturbationRow {
  double delta = 0.0;
  double change = 0.0;  // ||phi(delta) - phi||
  double ratio = 0.0;   // change / delta (0 when delta = 0)
  bool solved = true;
  std::string message;
};

struct PerturbationTable {
  std::uint64_t seed = 0;
  MatrixXd direction;  // unit L2-norm perturbation of w
  std::vector<PerturbationRow> rows;
};

/// Re-solves the game with w + delta * E for a fixed pseudo-random direction E
/// of unit L2 norm and reports how far the equilibrium moves per unit delta.
inline PerturbationTable perturbation_study(const PayoffStructure& payoff, const InformationStructure& info,
                                            const AgentGrid& grid, const std::vector<double>& deltas,
                                            std::uint64_t seed = 7, const Tolerances& tol = kDefaultTolerances) {
  const StandardizedInfo std_info = standardize(info, tol.pd);
  const AffineProfile base = solve_equilibrium(build_operator(payoff, std_info, grid), tol);
  const Index n = grid.size();

  PerturbationTable table;
  table.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  table.direction.resize(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) table.direction(i, j) = normal(rng);
  table.direction /= std::sqrt(grid.weight() * grid.weight() * table.direction.squaredNorm());

  for (double delta : deltas) {
    PerturbationRow row;
    row.delta = delta;
    PayoffStructure moved = payoff;
    moved.w += delta * table.direction;
    try {
      const AffineProfile shifted = solve_equilibrium(build_operator(moved, std_info, grid), tol);
      row.change = profile_distance(shifted, base, grid.weight());
      row.ratio = delta == 0.0 ? 0.0 : row.change / std::abs(delta);
    } catch (const Error& e) {
      row.solved = false;
      row.message = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace lqg
