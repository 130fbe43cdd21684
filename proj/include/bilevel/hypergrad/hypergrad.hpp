#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "bilevel/core/counters.hpp"
#include "bilevel/core/oracle.hpp"

namespace bilevel::hypergrad {

enum class EstimatorKind { implicit_cg, itd, first_order, exact };

[[nodiscard]] std::string_view to_string(EstimatorKind kind);
/// Throws ConfigError for unknown names.
[[nodiscard]] EstimatorKind parse_estimator(std::string_view name);

using TaskSpan = std::span<const TaskOracle* const>;

struct HypergradientEstimate {
  Vector grad;
  EstimatorKind estimator = EstimatorKind::exact;
  int K_used = 0;
  int N_used = 0;
  /// Final CG residual per task (implicit_cg only).
  std::vector<double> per_task_residuals;
  EvalCounters counters_delta;
};

/// Lower-level iterates phi^0 ... phi^K taken at a fixed theta.
struct LowerTrajectory {
  std::vector<Vector> snapshots;
  Vector theta;

  [[nodiscard]] int steps() const { return static_cast<int>(snapshots.size()) - 1; }
};

struct ImplicitOutput {
  HypergradientEstimate estimate;
  /// CG solutions, to warm-start the next outer iteration.
  std::vector<Vector> v_out;
};

/// Implicit hypergradient with CG-estimated Hessian-inverse-vector products.
///
/// Per task: v_i = CG(hvp_g(theta, phi_i, .), grad_f_phi(theta, phi_i), v_warm_i, N);
/// the Jacobian-vector products jvp_g(theta, phi_i, v_i) are summed in
/// ascending task order into u, and
///   grad = mean_i grad_f_theta(theta, phi_i) - u / |B|.
/// CG errors are rethrown annotated with the task index.
[[nodiscard]] ImplicitOutput implicit_estimate(TaskSpan tasks, const Vector& theta,
                                               std::span<const Vector> phi_finals,
                                               std::span<const Vector> v_warms, int N,
                                               double tol, int workers = 1);

/// Iterative differentiation through K lower-level GD steps, by reverse
/// accumulation over the stored trajectory (matrix-vector products only).
[[nodiscard]] HypergradientEstimate itd_estimate(TaskSpan tasks, const Vector& theta,
                                                 std::span<const LowerTrajectory> trajectories,
                                                 double lambda_phi, int workers = 1);

/// First-order estimate: the implicit term is dropped.
[[nodiscard]] HypergradientEstimate first_order_estimate(TaskSpan tasks, const Vector& theta,
                                                         std::span<const Vector> phi_finals);

/// Closed-form hypergradient, for tasks that expose exact_hypergrad_term.
[[nodiscard]] HypergradientEstimate exact_estimate(TaskSpan tasks, const Vector& theta);

/// Batch mean of exact_hypergrad_term; throws NumericalError
/// "exact hypergradient unavailable" if any task lacks a closed form.
[[nodiscard]] Vector exact_hypergradient(TaskSpan tasks, const Vector& theta);

/// |estimate.grad - exact hypergradient|.
[[nodiscard]] double estimator_error(const HypergradientEstimate& estimate, TaskSpan tasks,
                                     const Vector& theta);

}  // namespace bilevel::hypergrad
