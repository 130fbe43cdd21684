#include "bilevel/hypergrad/hypergrad.hpp"

#include <string>

#include "bilevel/cg/cg.hpp"
#include "bilevel/core/error.hpp"
#include "bilevel/core/parallel.hpp"

namespace bilevel::hypergrad {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::implicit_cg: return "implicit_cg";
    case EstimatorKind::itd: return "itd";
    case EstimatorKind::first_order: return "first_order";
    case EstimatorKind::exact: return "exact";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view name) {
  for (auto k : {EstimatorKind::implicit_cg, EstimatorKind::itd, EstimatorKind::first_order,
                 EstimatorKind::exact})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

namespace {

void require_batch(TaskSpan tasks, std::size_t n, const char* what) {
  if (tasks.empty()) throw ConfigError(std::string(what) + ": empty task batch");
  if (n != tasks.size())
    throw ConfigError(std::string(what) + ": expected one entry per task");
}

void require_finite(const Vector& g, const char* what) {
  if (!g.allFinite()) throw NumericalError(std::string(what) + ": non-finite hypergradient");
}

}  // namespace

ImplicitOutput implicit_estimate(TaskSpan tasks, const Vector& theta,
                                 std::span<const Vector> phi_finals,
                                 std::span<const Vector> v_warms, int N, double tol,
                                 int workers) {
  require_batch(tasks, phi_finals.size(), "implicit_estimate");
  require_batch(tasks, v_warms.size(), "implicit_estimate");
  const std::size_t n = tasks.size();

  std::vector<EvalCounters> counters(n);
  std::vector<Vector> direct(n), jvps(n), v_out(n);
  std::vector<double> residuals(n);

  parallel_for(n, workers, [&](std::size_t i) {
    const CountedOracle oracle(*tasks[i], counters[i]);
    const Vector& phi = phi_finals[i];
    const Vector b = oracle.grad_f_phi(theta, phi);
    cg::CgOptions cg_options;
    cg_options.tol = tol;
    cg::CgResult sol;
    try {
      sol = cg::cg_solve([&](const Vector& x) { return oracle.hvp_g(theta, phi, x); }, b,
                         v_warms[i], N, cg_options);
    } catch (const NumericalError& e) {
      throw NumericalError("task " + std::to_string(i) + ": " + e.what());
    }
    jvps[i] = oracle.jvp_g(theta, phi, sol.v);
    direct[i] = oracle.grad_f_theta(theta, phi);
    residuals[i] = sol.final_residual;
    v_out[i] = std::move(sol.v);
  });

  ImplicitOutput out;
  auto& est = out.estimate;
  est.estimator = EstimatorKind::implicit_cg;
  est.N_used = N;
  Vector direct_sum = Vector::Zero(theta.size());
  Vector u = Vector::Zero(theta.size());
  for (std::size_t i = 0; i < n; ++i) {
    direct_sum += direct[i];
    u += jvps[i];
    est.counters_delta += counters[i];
  }
  const double batch = static_cast<double>(n);
  est.grad = direct_sum / batch - u / batch;
  require_finite(est.grad, "implicit_estimate");
  est.per_task_residuals = std::move(residuals);
  out.v_out = std::move(v_out);
  return out;
}

HypergradientEstimate itd_estimate(TaskSpan tasks, const Vector& theta,
                                   std::span<const LowerTrajectory> trajectories,
                                   double lambda_phi, int workers) {
  require_batch(tasks, trajectories.size(), "itd_estimate");
  const int K = trajectories.front().steps();
  if (K < 0) throw ConfigError("itd_estimate: empty trajectory");
  for (const auto& tr : trajectories)
    if (tr.steps() != K) throw ConfigError("itd_estimate: trajectory length mismatch");

  const std::size_t n = tasks.size();
  std::vector<EvalCounters> counters(n);
  std::vector<Vector> per_task(n);

  parallel_for(n, workers, [&](std::size_t i) {
    const CountedOracle oracle(*tasks[i], counters[i]);
    const auto& phis = trajectories[i].snapshots;
    Vector alpha = oracle.grad_f_phi(theta, phis[static_cast<std::size_t>(K)]);
    Vector acc = oracle.grad_f_theta(theta, phis[static_cast<std::size_t>(K)]);
    for (int k = K - 1; k >= 0; --k) {
      const Vector& phi_k = phis[static_cast<std::size_t>(k)];
      acc -= lambda_phi * oracle.jvp_g(theta, phi_k, alpha);
      alpha -= lambda_phi * oracle.hvp_g(theta, phi_k, alpha);
    }
    per_task[i] = std::move(acc);
  });

  HypergradientEstimate est;
  est.estimator = EstimatorKind::itd;
  est.K_used = K;
  est.grad = Vector::Zero(theta.size());
  for (std::size_t i = 0; i < n; ++i) {
    est.grad += per_task[i];
    est.counters_delta += counters[i];
  }
  est.grad /= static_cast<double>(n);
  require_finite(est.grad, "itd_estimate");
  return est;
}

HypergradientEstimate first_order_estimate(TaskSpan tasks, const Vector& theta,
                                           std::span<const Vector> phi_finals) {
  require_batch(tasks, phi_finals.size(), "first_order_estimate");
  HypergradientEstimate est;
  est.estimator = EstimatorKind::first_order;
  est.grad = Vector::Zero(theta.size());
  for (std::size_t i = 0; i < tasks.size(); ++i)
    est.grad += CountedOracle(*tasks[i], est.counters_delta).grad_f_theta(theta, phi_finals[i]);
  est.grad /= static_cast<double>(tasks.size());
  require_finite(est.grad, "first_order_estimate");
  return est;
}

Vector exact_hypergradient(TaskSpan tasks, const Vector& theta) {
  if (tasks.empty()) throw ConfigError("exact_hypergradient: empty task batch");
  Vector sum = Vector::Zero(theta.size());
  for (const auto* t : tasks) {
    auto term = t->exact_hypergrad_term(theta);
    if (!term) throw NumericalError("exact hypergradient unavailable");
    sum += *term;
  }
  return sum / static_cast<double>(tasks.size());
}

HypergradientEstimate exact_estimate(TaskSpan tasks, const Vector& theta) {
  HypergradientEstimate est;
  est.estimator = EstimatorKind::exact;
  est.grad = exact_hypergradient(tasks, theta);
  return est;
}

double estimator_error(const HypergradientEstimate& estimate, TaskSpan tasks,
                       const Vector& theta) {
  return (estimate.grad - exact_hypergradient(tasks, theta)).norm();
}

}  // namespace bilevel::hypergrad
