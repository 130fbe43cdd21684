#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bilevel/bench/config.hpp"

namespace bilevel::bench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct CommandOptions {
  std::string config_path;
  std::filesystem::path out_dir = ".";
  /// Overrides optimizer.workers when set.
  std::optional<int> workers;
  /// sweep only: run a single cell (row index in the full table).
  std::optional<std::size_t> only_cell;
};

/// Runs the outer loop and writes <out>/run.jsonl plus <out>/family.yaml.
int cmd_run(const CommandOptions& options, std::ostream& diag);

/// Checks every oracle method of the family against central differences at
/// `gradcheck.probes` seeded points; writes <out>/gradcheck.txt. Exit 0 iff
/// every worst relative error is below the threshold, else 3.
int cmd_gradcheck(const CommandOptions& options, std::ostream& diag);

/// Runs each Cartesian sweep cell and writes <out>/sweep.csv.
int cmd_sweep(const CommandOptions& options, std::ostream& diag);

/// One row of the sweep table.
struct SweepCell {
  int K = 0;
  int N = 0;
  std::size_t batch_size = 0;
  hypergrad::EstimatorKind estimator = hypergrad::EstimatorKind::implicit_cg;
  int repetitions = 0;
  std::optional<double> running_mean_grad_sq;
  std::optional<double> tail_mean_grad_sq;
  std::optional<double> final_estimator_error;
  optimizer::MemoryReport memory;
  EvalCounters counters;
};

/// Cartesian product of the sweep axes (absent axes take the optimizer value),
/// in K-major, then N, batch_size, estimator order.
[[nodiscard]] std::vector<SweepCell> sweep_cells(const ExperimentConfig& config);
/// Seed of repetition `rep` of a cell; depends only on the cell's axis values.
[[nodiscard]] std::uint64_t cell_seed(std::uint64_t base, const SweepCell& cell, int rep);
/// Runs all repetitions of one cell and fills its metrics.
void run_sweep_cell(const ExperimentConfig& config, const tasks::Family& family, SweepCell& cell,
                    int workers);

[[nodiscard]] std::string sweep_header();
[[nodiscard]] std::string sweep_row(const SweepCell& cell);

/// Writes the run log for a parsed config to `out` (used by cmd_run).
void write_run_log(const ExperimentConfig& config, int workers, std::ostream& out);

}  // namespace bilevel::bench
