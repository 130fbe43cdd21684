#pragma once

#include <cstdint>

namespace bilevel {

/// Problem constants of the regularity assumptions: strong convexity mu of
/// the lower level, Lipschitz constants of f, grad f, grad g, the mixed and
/// phi-Hessians of g, and the variance bounds of the stochastic oracles.
struct ProblemConstants {
  double mu = 1.0;
  double l_f0 = 1.0;
  double l_f = 1.0;
  double l_g = 1.0;
  double l_g1 = 1.0;
  double l_g2 = 1.0;
  double sigma_f1_sq = 0.0;
  double sigma_g1_sq = 0.0;
  double sigma_g2_sq = 0.0;

  [[nodiscard]] double kappa() const noexcept { return l_g / mu; }

  /// Throws ConfigError unless all constants are positive/non-negative as
  /// required and mu <= l_g.
  void validate() const;
};

/// Smoothness constant L_F of the upper-level objective:
///   L_F = L + (2L^2 + l_g1 l_f0^2)/mu + (L^3 + l_f0 L (l_g1 + l_g2))/mu^2
///         + l_g2 L^2 l_f0 / mu^3,   L = max(l_f, l_g).
[[nodiscard]] double compute_smoothness_constant(const ProblemConstants& c);

/// Smallest K with 2 (1 - mu lambda_phi)^K <= 1/3, i.e.
/// ceil(log 6 / -log(1 - mu lambda_phi)).
///
/// Throws ConfigError("contraction factor out of range") unless
/// 0 < mu lambda_phi < 1, and when the result exceeds `cap`.
[[nodiscard]] std::int64_t compute_inner_iteration_floor(const ProblemConstants& c,
                                                         double lambda_phi,
                                                         std::int64_t cap = 1'000'000);

}  // namespace bilevel
