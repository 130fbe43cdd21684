#pragma once

#include <cstdint>

namespace bilevel {

/// Oracle evaluation counts.
///
/// One hvp_g call is one gradient evaluation on phi and one jvp_g call is one
/// gradient evaluation on theta, the same granularity used when counting the
/// per-iteration cost of the outer loop.
struct EvalCounters {
  std::uint64_t n_grad_f_theta = 0;
  std::uint64_t n_grad_f_phi = 0;
  std::uint64_t n_grad_g_phi = 0;
  std::uint64_t n_hvp = 0;
  std::uint64_t n_jvp = 0;

  /// Evaluations on the task parameters: grad_f_phi + grad_g_phi + hvp.
  [[nodiscard]] std::uint64_t phi_side() const noexcept {
    return n_grad_f_phi + n_grad_g_phi + n_hvp;
  }
  /// Evaluations on the meta-parameters: grad_f_theta + jvp.
  [[nodiscard]] std::uint64_t theta_side() const noexcept {
    return n_grad_f_theta + n_jvp;
  }
  [[nodiscard]] std::uint64_t total() const noexcept {
    return phi_side() + theta_side();
  }

  EvalCounters& operator+=(const EvalCounters& o) noexcept {
    n_grad_f_theta += o.n_grad_f_theta;
    n_grad_f_phi += o.n_grad_f_phi;
    n_grad_g_phi += o.n_grad_g_phi;
    n_hvp += o.n_hvp;
    n_jvp += o.n_jvp;
    return *this;
  }

  friend bool operator==(const EvalCounters&, const EvalCounters&) = default;
};

[[nodiscard]] inline EvalCounters merge_counters(EvalCounters a,
                                                 const EvalCounters& b) noexcept {
  a += b;
  return a;
}

}  // namespace bilevel
