#include "bilevel/core/constants.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bilevel/core/error.hpp"

namespace bilevel {

namespace {
void check_signs(const ProblemConstants& c) {
  const auto& [mu, l_f0, l_f, l_g, l_g1, l_g2, sigma_f1_sq, sigma_g1_sq, sigma_g2_sq] = c;
  const bool positive = mu > 0 && l_f0 >= 0 && l_f > 0 && l_g > 0 && l_g1 >= 0 && l_g2 >= 0;
  const bool variances = sigma_f1_sq >= 0 && sigma_g1_sq >= 0 && sigma_g2_sq >= 0;
  if (!positive || !variances) throw ConfigError("problem constants must be positive");
}
}  // namespace

void ProblemConstants::validate() const {
  check_signs(*this);
  if (mu > l_g) {
    std::ostringstream msg;
    msg << "problem constants: mu (" << mu << ") exceeds l_g (" << l_g << ")";
    throw ConfigError(msg.str());
  }
}

// Only signs are checked: the formula is well defined without mu <= l_g.
double compute_smoothness_constant(const ProblemConstants& c) {
  check_signs(c);
  const double L = std::max(c.l_f, c.l_g);
  const double mu = c.mu;
  return L + (2 * L * L + c.l_g1 * c.l_f0 * c.l_f0) / mu +
         (L * L * L + c.l_f0 * L * (c.l_g1 + c.l_g2)) / (mu * mu) +
         (c.l_g2 * L * L * c.l_f0) / (mu * mu * mu);
}

std::int64_t compute_inner_iteration_floor(const ProblemConstants& c, double lambda_phi,
                                           std::int64_t cap) {
  const double rate = c.mu * lambda_phi;
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("contraction factor out of range");
  const double ratio = std::log(6.0) / -std::log1p(-rate);
  if (!std::isfinite(ratio) || ratio > static_cast<double>(cap)) {
    std::ostringstream msg;
    msg << "inner iteration floor " << ratio << " exceeds cap " << cap;
    throw ConfigError(msg.str());
  }
  // Absorb last-ulp noise so exact integers (e.g. mu*lambda = 5/6) are not
  // pushed to the next integer.
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-12 * std::max(1.0, ratio))
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(nearest));
  return static_cast<std::int64_t>(std::ceil(ratio));
}

}  // namespace bilevel
