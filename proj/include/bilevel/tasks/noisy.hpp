#pragma once

#include <cstdint>
#include <mutex>

#include "bilevel/core/oracle.hpp"
#include "bilevel/core/rng.hpp"

namespace bilevel::tasks {

/// Standard deviations of the stochastic oracle perturbations.
struct NoiseLevels {
  double sigma_f1 = 0.0;  // grad_f_theta, grad_f_phi
  double sigma_g1 = 0.0;  // grad_g_phi
  double sigma_g2 = 0.0;  // hvp_g, jvp_g

  [[nodiscard]] bool zero() const noexcept {
    return sigma_f1 == 0.0 && sigma_g1 == 0.0 && sigma_g2 == 0.0;
  }
};

/// Unbiased stochastic view of a TaskOracle.
///
/// Gradient outputs get i.i.d. N(0, sigma^2) added per coordinate. The
/// second-order products get E v with E a fresh random matrix whose entries
/// are N(0, sigma_g2^2 / q), so each output coordinate has variance
/// sigma_g2^2 |v|^2 / q and the perturbation stays linear in v. A zero
/// sigma leaves the matching method untouched and draws nothing.
///
/// Draws are serialized on an internal mutex; results are reproducible given
/// the call order.
class NoisyOracle final : public TaskOracle {
 public:
  NoisyOracle(const TaskOracle& inner, NoiseLevels levels, std::uint64_t seed);
  NoisyOracle(const TaskOracle& inner, NoiseLevels levels, Rng stream);

  [[nodiscard]] const TaskOracle& inner() const { return *inner_; }
  [[nodiscard]] const NoiseLevels& levels() const { return levels_; }

  [[nodiscard]] Index meta_dim() const override { return inner_->meta_dim(); }
  [[nodiscard]] Index task_dim() const override { return inner_->task_dim(); }

  [[nodiscard]] double value_f(const Vector& theta, const Vector& phi) const override {
    return inner_->value_f(theta, phi);
  }
  [[nodiscard]] double value_g(const Vector& theta, const Vector& phi) const override {
    return inner_->value_g(theta, phi);
  }
  [[nodiscard]] Vector grad_f_theta(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector grad_f_phi(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector grad_g_phi(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector hvp_g(const Vector& theta, const Vector& phi,
                             const Vector& v) const override;
  [[nodiscard]] Vector jvp_g(const Vector& theta, const Vector& phi,
                             const Vector& v) const override;

  [[nodiscard]] std::optional<Vector> exact_phi_star(const Vector& theta) const override {
    return inner_->exact_phi_star(theta);
  }
  [[nodiscard]] std::optional<Vector> exact_hypergrad_term(const Vector& theta) const override {
    return inner_->exact_hypergrad_term(theta);
  }

 private:
  void perturb(Vector& out, double sigma) const;

  const TaskOracle* inner_;
  NoiseLevels levels_;
  mutable std::mutex mutex_;
  mutable Rng stream_;
};

/// Test hook: adds a constant bias to every coordinate of grad_g_phi.
class BiasedGradGOracle final : public TaskOracle {
 public:
  BiasedGradGOracle(const TaskOracle& inner, double bias) : inner_(&inner), bias_(bias) {}

  [[nodiscard]] Index meta_dim() const override { return inner_->meta_dim(); }
  [[nodiscard]] Index task_dim() const override { return inner_->task_dim(); }
  [[nodiscard]] double value_f(const Vector& t, const Vector& p) const override { return inner_->value_f(t, p); }
  [[nodiscard]] double value_g(const Vector& t, const Vector& p) const override { return inner_->value_g(t, p); }
  [[nodiscard]] Vector grad_f_theta(const Vector& t, const Vector& p) const override { return inner_->grad_f_theta(t, p); }
  [[nodiscard]] Vector grad_f_phi(const Vector& t, const Vector& p) const override { return inner_->grad_f_phi(t, p); }
  [[nodiscard]] Vector grad_g_phi(const Vector& t, const Vector& p) const override {
    Vector g = inner_->grad_g_phi(t, p);
    g.array() += bias_;
    return g;
  }
  [[nodiscard]] Vector hvp_g(const Vector& t, const Vector& p, const Vector& v) const override { return inner_->hvp_g(t, p, v); }
  [[nodiscard]] Vector jvp_g(const Vector& t, const Vector& p, const Vector& v) const override { return inner_->jvp_g(t, p, v); }

 private:
  const TaskOracle* inner_;
  double bias_;
};

}  // namespace bilevel::tasks
