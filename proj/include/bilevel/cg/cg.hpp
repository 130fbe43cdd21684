#pragma once

#include <functional>

#include "bilevel/core/types.hpp"

namespace bilevel::cg {

/// Symmetric positive-definite linear operator v -> H v.
using Operator = std::function<Vector(const Vector&)>;

/// Iterate of the conjugate-gradient recurrence at a step boundary.
struct CgState {
  Vector v;  // iterate
  Vector r;  // residual b - H v (recurrence form)
  Vector p;  // search direction
  int iter = 0;
  double residual_norm = 0.0;
};

struct CgResult {
  Vector v;
  int iters_used = 0;
  double final_residual = 0.0;
  bool early_exit = false;
};

struct CgOptions {
  /// Relative stopping tolerance; 0 runs exactly N iterations.
  double tol = 1e-10;
  /// Lower bound on |b| in the stopping test.
  double floor = 1e-30;
  /// Called at every step boundary (after initialization and each update).
  std::function<void(const CgState&)> observer;
};

/// Warm-started conjugate gradient for H v = b.
///
/// Runs the plain (unpreconditioned) recurrence
///   r0 = p0 = b - H v0
///   eta = r'r / p'Hp;  v += eta p;  r -= eta Hp
///   zeta = r+'r+ / r'r;  p = r+ + zeta p
/// for at most N iterations, stopping once |r| <= tol * max(|b|, floor).
/// Applies H exactly once for r0 and once per iteration.
///
/// Throws NumericalError if p'Hp <= 1e-300 while the residual is above
/// tolerance, or if any intermediate quantity is non-finite.
[[nodiscard]] CgResult cg_solve(const Operator& apply_H, const Vector& b, const Vector& v0,
                                int N, const CgOptions& options = {});

}  // namespace bilevel::cg
