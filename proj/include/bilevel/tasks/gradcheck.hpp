#pragma once

#include <array>
#include <string_view>

#include "bilevel/core/oracle.hpp"

namespace bilevel::tasks {

/// Worst relative error of each oracle method against central differences.
///
/// Relative error of a vector a against reference b is
/// max_i |a_i - b_i| / max(|a|_inf, |b|_inf, 1).
struct GradcheckReport {
  double grad_f_theta = 0.0;
  double grad_f_phi = 0.0;
  double grad_g_phi = 0.0;
  double hvp_g = 0.0;
  double jvp_g = 0.0;

  static constexpr std::array<std::string_view, 5> kMethods = {
      "grad_f_theta", "grad_f_phi", "grad_g_phi", "hvp_g", "jvp_g"};

  [[nodiscard]] std::array<double, 5> values() const {
    return {grad_f_theta, grad_f_phi, grad_g_phi, hvp_g, jvp_g};
  }
  [[nodiscard]] double worst() const;
  [[nodiscard]] std::string_view worst_method() const;
  /// Elementwise maximum.
  void absorb(const GradcheckReport& other);
};

/// Compares every oracle method against central differences with step eps.
/// `direction` is the probe vector for hvp_g/jvp_g (length q).
///
/// Throws ConfigError for eps outside [1e-7, 1e-3] and NumericalError naming
/// the method if an oracle returns a non-finite value.
[[nodiscard]] GradcheckReport gradcheck(const TaskOracle& oracle, const Vector& theta,
                                        const Vector& phi, const Vector& direction,
                                        double eps = 1e-5);

[[nodiscard]] double relative_error(const Vector& actual, const Vector& reference);

}  // namespace bilevel::tasks
