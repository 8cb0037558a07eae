#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lqg/error.hpp"

namespace lqg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Agent indices into a grid. Teams and PSD test subsets are lists of these.
using IndexSet = std::vector<Index>;

namespace linalg {

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const MatrixXd& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Symmetric root of a positive-definite matrix raised to `power` (+-1/2).
/// Eigenvalues below `floor` are rejected with `kind`.
inline MatrixXd spd_power(const MatrixXd& m, double power, double floor, ErrorKind kind,
                          const std::string& what) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
  const VectorXd& lam = es.eigenvalues();
  if (lam.size() > 0 && lam.minCoeff() < floor) {
    fail(kind, what + " (min eigenvalue " + format_number(lam.minCoeff()) + ")");
  }
  VectorXd scaled = lam.unaryExpr([&](double v) { return std::pow(std::max(v, floor), power); });
  return es.eigenvectors() * scaled.asDiagonal() * es.eigenvectors().transpose();
}

/// Factor L with L L^T = m for a PSD matrix; negative eigenvalues are clamped at zero.
inline MatrixXd psd_factor(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
  VectorXd root = es.eigenvalues().unaryExpr([](double v) { return std::sqrt(std::max(v, 0.0)); });
  return es.eigenvectors() * root.asDiagonal();
}

/// Solve A x = b for symmetric positive-definite A. Rejects A whose smallest
/// eigenvalue falls below `rel_floor` times its largest.
inline MatrixXd spd_solve(const MatrixXd& a, const MatrixXd& b, double rel_floor, ErrorKind kind,
                          const std::string& what) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a));
  const VectorXd& lam = es.eigenvalues();
  const double top = lam.size() ? lam.cwiseAbs().maxCoeff() : 0.0;
  if (lam.size() == 0 || top <= 0.0 || lam.minCoeff() < rel_floor * top) {
    fail(kind, what);
  }
  const MatrixXd& v = es.eigenvectors();
  return v * (lam.cwiseInverse().asDiagonal() * (v.transpose() * b));
}

}  // namespace linalg
}  // namespace lqg
