#pragma once

namespace lqg {

/// Numerical thresholds shared across the library. The CLI may override them
/// per run through a Tolerances value; the library defaults live here.
struct Tolerances {
  double psd = 1e-8;       // minimum eigenvalue allowed below zero
  double pd = 1e-10;       // smallest eigenvalue accepted as positive
  double residual = 1e-10; // relative residual of the linear solve
  double spectral = 1e-8;  // distance of an eigenvalue to 1 flagged as singular
};

inline constexpr Tolerances kDefaultTolerances{};

}  // namespace lqg
