#pragma once

#include "bilevel/core/rng.hpp"
#include "bilevel/core/types.hpp"

namespace bilevel {

/// Dense Cholesky solve of H x = b.
///
/// Test oracle only; the optimizer never forms a Hessian. Throws
/// NumericalError if H is not symmetric to 1e-12 (relative to its largest
/// entry) or if a non-positive pivot is met.
[[nodiscard]] Vector spd_solve_oracle(const Matrix& H, const Vector& b);

/// Random symmetric matrix Q diag(eigenvalues) Q^T with Q Haar-orthogonal.
[[nodiscard]] Matrix random_spd(Rng& rng, const Vector& eigenvalues);

/// Largest asymmetry |H_ij - H_ji| of a square matrix.
[[nodiscard]] double max_asymmetry(const Matrix& H);

}  // namespace bilevel
