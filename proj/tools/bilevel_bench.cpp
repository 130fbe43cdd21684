// Command-line front end: run, gradcheck and sweep over a YAML experiment config.

#include <iostream>

#include <CLI11.hpp>

#include "bilevel/bench/commands.hpp"

int main(int argc, char** argv) {
  using namespace bilevel::bench;

  CLI::App app{"Memory-reduced bilevel meta-learning benchmarks"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::string out_dir = ".";
  int workers = 0;
  long long cell = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opts.config_path, "experiment config (YAML)")->required();
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads (overrides optimizer.workers)")
        ->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "run the outer loop and write run.jsonl");
  add_common(run);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference oracle check");
  add_common(gradcheck);
  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep, writes sweep.csv");
  add_common(sweep);
  sweep->add_option("--cell", cell, "run only this cell (row index of the full table)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  opts.out_dir = out_dir;
  if (workers > 0) opts.workers = workers;
  if (cell >= 0) opts.only_cell = static_cast<std::size_t>(cell);

  if (*run) return cmd_run(opts, std::cerr);
  if (*gradcheck) return cmd_gradcheck(opts, std::cerr);
  return cmd_sweep(opts, std::cerr);
}
