#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bilevel/optimizer/algorithm.hpp"

namespace bilevel::bench {

/// Version of the line-delimited run-log schema. Every line carries it.
inline constexpr int kLogSchemaVersion = 1;

/// Iteration line:
///   {"schema_version":1,"type":"iteration","t":..,"grad_est_norm":..,
///    "grad_exact_norm":..|null,"estimator_error":..|null,"phi_gap":..|null,
///    "counters":{"n_grad_f_theta":..,"n_grad_f_phi":..,"n_grad_g_phi":..,
///                "n_hvp":..,"n_jvp":..},
///    "memory":{"workspace_floats":..,"trajectory_floats":..}[,"wall_ns":..]}
[[nodiscard]] std::string format_iteration(const optimizer::RunRecord& record, bool timing);

struct RunSummary {
  int T = 0;
  std::string estimator;
  int K = 0;
  int N = 0;
  std::size_t batch_size = 0;
  double lambda_theta = 0.0;
  double lambda_phi = 0.0;
  std::vector<double> theta;
  std::optional<double> grad_exact_norm;       // at theta_T
  std::optional<double> running_mean_grad_sq;  // over logged-exact iterations
  EvalCounters counters;
  optimizer::MemoryReport memory;
};

/// Summary line: {"schema_version":1,"type":"summary", <RunSummary fields>}.
[[nodiscard]] std::string format_summary(const RunSummary& summary);

[[nodiscard]] RunSummary summarize(const optimizer::RunResult& result,
                                   const optimizer::OuterConfig& config);

struct ParsedLog {
  std::vector<optimizer::RunRecord> iterations;
  RunSummary summary;
};

/// Parses a run log, validating schema_version and line types.
/// Throws ConfigError on any schema violation.
[[nodiscard]] ParsedLog parse_run_log(std::istream& in);

/// Shortest round-trip decimal text of a double.
[[nodiscard]] std::string format_double(double x);

}  // namespace bilevel::bench
