#pragma once

#include <optional>

#include "bilevel/core/counters.hpp"
#include "bilevel/core/types.hpp"

namespace bilevel {

/// Per-task first- and second-order information for a bilevel problem
///   min_theta f(theta, phi*(theta)),  phi*(theta) = argmin_phi g(theta, phi).
///
/// Implementations are immutable after construction and must be callable
/// concurrently from several threads. Evaluation counting is done by
/// CountedOracle, not by implementations.
class TaskOracle {
 public:
  virtual ~TaskOracle() = default;

  [[nodiscard]] virtual Index meta_dim() const = 0;
  [[nodiscard]] virtual Index task_dim() const = 0;

  [[nodiscard]] virtual double value_f(const Vector& theta, const Vector& phi) const = 0;
  [[nodiscard]] virtual double value_g(const Vector& theta, const Vector& phi) const = 0;

  [[nodiscard]] virtual Vector grad_f_theta(const Vector& theta, const Vector& phi) const = 0;
  [[nodiscard]] virtual Vector grad_f_phi(const Vector& theta, const Vector& phi) const = 0;
  [[nodiscard]] virtual Vector grad_g_phi(const Vector& theta, const Vector& phi) const = 0;
  /// Applies the phi-Hessian of g (q x q) to v.
  [[nodiscard]] virtual Vector hvp_g(const Vector& theta, const Vector& phi,
                                     const Vector& v) const = 0;
  /// Applies the mixed second derivative of g (p x q) to v.
  [[nodiscard]] virtual Vector jvp_g(const Vector& theta, const Vector& phi,
                                     const Vector& v) const = 0;

  [[nodiscard]] virtual std::optional<Vector> exact_phi_star(const Vector&) const {
    return std::nullopt;
  }
  /// Per-task contribution to the exact hypergradient at theta.
  [[nodiscard]] virtual std::optional<Vector> exact_hypergrad_term(const Vector&) const {
    return std::nullopt;
  }
};

/// Forwards to a TaskOracle and counts every call.
class CountedOracle {
 public:
  CountedOracle(const TaskOracle& oracle, EvalCounters& counters)
      : oracle_(&oracle), counters_(&counters) {}

  [[nodiscard]] const TaskOracle& oracle() const { return *oracle_; }
  [[nodiscard]] const EvalCounters& counters() const { return *counters_; }

  [[nodiscard]] Vector grad_f_theta(const Vector& theta, const Vector& phi) const {
    ++counters_->n_grad_f_theta;
    return oracle_->grad_f_theta(theta, phi);
  }
  [[nodiscard]] Vector grad_f_phi(const Vector& theta, const Vector& phi) const {
    ++counters_->n_grad_f_phi;
    return oracle_->grad_f_phi(theta, phi);
  }
  [[nodiscard]] Vector grad_g_phi(const Vector& theta, const Vector& phi) const {
    ++counters_->n_grad_g_phi;
    return oracle_->grad_g_phi(theta, phi);
  }
  [[nodiscard]] Vector hvp_g(const Vector& theta, const Vector& phi, const Vector& v) const {
    ++counters_->n_hvp;
    return oracle_->hvp_g(theta, phi, v);
  }
  [[nodiscard]] Vector jvp_g(const Vector& theta, const Vector& phi, const Vector& v) const {
    ++counters_->n_jvp;
    return oracle_->jvp_g(theta, phi, v);
  }

 private:
  const TaskOracle* oracle_;
  EvalCounters* counters_;
};

}  // namespace bilevel
