#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bilevel/optimizer/algorithm.hpp"
#include "bilevel/tasks/family.hpp"

namespace bilevel::bench {

/// Environment variable that overrides optimizer.seed.
inline constexpr const char* kSeedEnv = "BILEVEL_SEED";

struct OutputConfig {
  /// Write every n-th iteration record to the run log.
  int log_every = 1;
  /// Exact metrics every n-th iteration; 0 picks 1 for q <= 64, else 10.
  int exact_every = 0;
  /// Include wall-clock time in records (makes logs non-reproducible).
  bool timing = false;

  [[nodiscard]] int resolved_exact_every(Index q) const {
    return exact_every > 0 ? exact_every : (q <= 64 ? 1 : 10);
  }
};

struct SweepConfig {
  bool present = false;
  std::vector<int> K;
  std::vector<int> N;
  std::vector<std::size_t> batch_size;
  std::vector<hypergrad::EstimatorKind> estimator;
  int repetitions = 1;
  /// Window (in iterations) of the tail mean of |grad F|^2.
  int tail = 500;
};

struct GradcheckConfig {
  int probes = 5;
  double epsilon = 1e-5;
  /// Defaults to 1e-7 for quadratic families and 1e-4 for sinusoid.
  std::optional<double> threshold;
  /// Test hook: constant bias added to grad_g_phi.
  double inject_grad_g_phi_bias = 0.0;
};

struct ExperimentConfig {
  tasks::FamilySpec family;
  optimizer::OuterConfig optimizer;
  std::optional<Vector> theta0;
  int workers = 1;
  OutputConfig output;
  SweepConfig sweep;
  GradcheckConfig gradcheck;
};

/// Parses a configuration document. Unknown keys raise ConfigError naming
/// the key and its line.
[[nodiscard]] ExperimentConfig parse_config(const std::string& text);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

/// Applies BILEVEL_SEED if set.
void apply_env_overrides(ExperimentConfig& config);

}  // namespace bilevel::bench
