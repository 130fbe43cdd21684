#include "bilevel/tasks/noisy.hpp"

#include <cmath>

#include "bilevel/core/error.hpp"

namespace bilevel::tasks {

NoisyOracle::NoisyOracle(const TaskOracle& inner, NoiseLevels levels, std::uint64_t seed)
    : NoisyOracle(inner, levels, Rng(seed)) {}

NoisyOracle::NoisyOracle(const TaskOracle& inner, NoiseLevels levels, Rng stream)
    : inner_(&inner), levels_(levels), stream_(std::move(stream)) {
  if (levels.sigma_f1 < 0 || levels.sigma_g1 < 0 || levels.sigma_g2 < 0)
    throw ConfigError("noise levels must be non-negative");
}

void NoisyOracle::perturb(Vector& out, double sigma) const {
  if (sigma == 0.0) return;
  std::lock_guard lock(mutex_);
  for (Index i = 0; i < out.size(); ++i) out[i] += sigma * stream_.normal();
}

Vector NoisyOracle::grad_f_theta(const Vector& theta, const Vector& phi) const {
  Vector g = inner_->grad_f_theta(theta, phi);
  perturb(g, levels_.sigma_f1);
  return g;
}

Vector NoisyOracle::grad_f_phi(const Vector& theta, const Vector& phi) const {
  Vector g = inner_->grad_f_phi(theta, phi);
  perturb(g, levels_.sigma_f1);
  return g;
}

Vector NoisyOracle::grad_g_phi(const Vector& theta, const Vector& phi) const {
  Vector g = inner_->grad_g_phi(theta, phi);
  perturb(g, levels_.sigma_g1);
  return g;
}

Vector NoisyOracle::hvp_g(const Vector& theta, const Vector& phi, const Vector& v) const {
  Vector h = inner_->hvp_g(theta, phi, v);
  const double q = static_cast<double>(inner_->task_dim());
  perturb(h, levels_.sigma_g2 * v.norm() / std::sqrt(q));
  return h;
}

Vector NoisyOracle::jvp_g(const Vector& theta, const Vector& phi, const Vector& v) const {
  Vector j = inner_->jvp_g(theta, phi, v);
  const double q = static_cast<double>(inner_->task_dim());
  perturb(j, levels_.sigma_g2 * v.norm() / std::sqrt(q));
  return j;
}

}  // namespace bilevel::tasks
