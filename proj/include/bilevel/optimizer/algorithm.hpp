#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bilevel/core/counters.hpp"
#include "bilevel/core/oracle.hpp"
#include "bilevel/hypergrad/hypergrad.hpp"
#include "bilevel/optimizer/memory.hpp"
#include "bilevel/tasks/family.hpp"

namespace bilevel::optimizer {

using hypergrad::EstimatorKind;

enum class Mode { deterministic, stochastic };
/// How phi^0 and the CG warm start are carried across outer iterations:
/// not at all, by batch position, or by pool index of the task.
enum class WarmStart { none, slot, task_id };

[[nodiscard]] std::string_view to_string(Mode m);
[[nodiscard]] std::string_view to_string(WarmStart w);
[[nodiscard]] Mode parse_mode(std::string_view name);
[[nodiscard]] WarmStart parse_warm_start(std::string_view name);

struct OuterConfig {
  int T = 100;
  int K = 10;
  int N = 10;
  /// Defaults: 1/(2 L_F) and 1/l_g from the family constants.
  std::optional<double> lambda_theta;
  std::optional<double> lambda_phi;
  std::size_t batch_size = 1;
  Mode mode = Mode::deterministic;
  WarmStart warm_start = WarmStart::slot;
  double tol_cg = 1e-10;
  std::uint64_t seed = 0;
  EstimatorKind estimator = EstimatorKind::implicit_cg;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// One row per outer iteration, evaluated at theta_t (before the update).
struct RunRecord {
  int t = 0;
  double grad_est_norm = 0.0;
  std::optional<double> grad_exact_norm;
  std::optional<double> estimator_error;
  std::optional<double> phi_gap;
  EvalCounters counters;  // cumulative
  MemoryReport memory;
  std::int64_t wall_ns = 0;
};

struct LowerSolveResult {
  Vector phi;
  std::optional<hypergrad::LowerTrajectory> trajectory;
};

/// K steps of phi <- phi - lambda_phi grad_g_phi(theta, phi).
/// Throws NumericalError naming the step if an iterate becomes non-finite.
[[nodiscard]] LowerSolveResult lower_solve(const CountedOracle& oracle, const Vector& theta,
                                           const Vector& phi0, int K, double lambda_phi,
                                           bool keep_trajectory);

struct RunOptions {
  int workers = 1;
  std::optional<Vector> theta0;
  /// Exact metrics every n-th iteration; 0 disables them.
  int exact_every = 1;
  bool keep_theta_path = false;
  std::function<void(const RunRecord&)> on_record;
};

struct RunResult {
  std::vector<RunRecord> records;
  Vector theta;                              // theta_T
  std::optional<double> final_grad_exact_norm;  // at theta_T
  std::vector<Vector> theta_path;            // theta_0 .. theta_T when requested
  double lambda_theta = 0.0;
  double lambda_phi = 0.0;
  EvalCounters counters;
  std::vector<std::string> warnings;
};

/// Memory-reduced bilevel outer loop.
///
/// Each iteration samples a batch (the first |B| pool tasks in deterministic
/// mode; |B| uniform draws with replacement in stochastic mode), warm-starts
/// phi^0 per config.warm_start, runs K lower GD steps per task, forms the
/// hypergradient with config.estimator and takes theta <- theta - lambda_theta g.
///
/// Exact metrics use the batch objective in deterministic mode and the whole
/// pool in stochastic mode. Results are independent of options.workers.
/// Throws NumericalError("iteration t: ...") on estimator failure or when
/// |theta| exceeds 1e12.
[[nodiscard]] RunResult run_algorithm1(const tasks::Family& family, const OuterConfig& config,
                                       const RunOptions& options = {});

struct EpsilonCheck {
  bool reached = false;
  int T_needed = 0;
};

/// Smallest T with (1/T) sum_{t<T} |grad F(theta_t)|^2 <= eps.
/// Throws ConfigError if any record lacks grad_exact_norm.
[[nodiscard]] EpsilonCheck epsilon_solution_check(const std::vector<RunRecord>& records, double eps);

/// Default stepsizes for a family: {lambda_theta, lambda_phi} = {1/(2 L_F), 1/l_g}.
[[nodiscard]] std::pair<double, double> default_stepsizes(const ProblemConstants& c);

}  // namespace bilevel::optimizer
