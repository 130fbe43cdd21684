#include "bilevel/bench/commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "bilevel/bench/run_log.hpp"
#include "bilevel/core/error.hpp"
#include "bilevel/core/parallel.hpp"
#include "bilevel/core/rng.hpp"
#include "bilevel/tasks/gradcheck.hpp"

namespace bilevel::bench {

namespace {

constexpr std::uint64_t kProbeStream = 0x70726f6265ULL;  // "probe"

template <class Body>
int guarded(std::ostream& diag, const char* command, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    diag << command << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    diag << command << ": numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    diag << command << ": error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

ExperimentConfig load(const CommandOptions& options) {
  ExperimentConfig cfg = load_config(options.config_path);
  apply_env_overrides(cfg);
  return cfg;
}

std::ofstream open_output(const std::filesystem::path& dir, const char* name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + (dir / name).string() + "'");
  return out;
}

std::string optional_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

void write_run_log(const ExperimentConfig& config, int workers, std::ostream& out) {
  const tasks::Family family(config.family);
  optimizer::RunOptions opts;
  opts.workers = workers;
  opts.theta0 = config.theta0;
  opts.exact_every = config.output.resolved_exact_every(family.task_dim());
  opts.on_record = [&](const optimizer::RunRecord& r) {
    if (r.t % config.output.log_every == 0) out << format_iteration(r, config.output.timing) << '\n';
  };
  const auto result = optimizer::run_algorithm1(family, config.optimizer, opts);
  out << format_summary(summarize(result, config.optimizer)) << '\n';
}

int cmd_run(const CommandOptions& options, std::ostream& diag) {
  return guarded(diag, "run", [&] {
    const ExperimentConfig cfg = load(options);
    {
      auto fam = open_output(options.out_dir, "family.yaml");
      fam << tasks::emit_family_spec(cfg.family) << '\n';
    }
    auto log = open_output(options.out_dir, "run.jsonl");
    write_run_log(cfg, options.workers.value_or(cfg.workers), log);
    log.flush();
    if (!log) throw ConfigError("failed writing run log");
    return kExitOk;
  });
}

int cmd_gradcheck(const CommandOptions& options, std::ostream& diag) {
  return guarded(diag, "gradcheck", [&] {
    const ExperimentConfig cfg = load(options);
    const tasks::Family family(cfg.family);
    const bool sinusoid = cfg.family.kind() == "sinusoid";
    const double threshold = cfg.gradcheck.threshold.value_or(sinusoid ? 1e-4 : 1e-7);

    std::ostringstream report;
    report << "# gradcheck family=" << cfg.family.kind() << " probes=" << cfg.gradcheck.probes
           << " epsilon=" << format_double(cfg.gradcheck.epsilon)
           << " threshold=" << format_double(threshold) << '\n';

    const Rng root = Rng(cfg.optimizer.seed).split(kProbeStream);
    tasks::GradcheckReport worst;
    for (int k = 0; k < cfg.gradcheck.probes; ++k) {
      Rng rng = root.split(static_cast<std::uint64_t>(k));
      const std::size_t task = static_cast<std::size_t>(k) % family.size();
      const Vector theta = family.initial_theta() + rng.normal_vector(family.meta_dim());
      const Vector phi = rng.normal_vector(family.task_dim());
      const Vector dir = rng.normal_vector(family.task_dim());
      const TaskOracle& clean = family.task(task);
      const tasks::BiasedGradGOracle biased(clean, cfg.gradcheck.inject_grad_g_phi_bias);
      const TaskOracle& oracle =
          cfg.gradcheck.inject_grad_g_phi_bias != 0.0 ? static_cast<const TaskOracle&>(biased) : clean;
      const auto r = tasks::gradcheck(oracle, theta, phi, dir, cfg.gradcheck.epsilon);
      report << "probe " << k << " task " << task;
      const auto values = r.values();
      for (std::size_t m = 0; m < values.size(); ++m)
        report << ' ' << tasks::GradcheckReport::kMethods[m] << '=' << format_double(values[m]);
      report << '\n';
      worst.absorb(r);
    }
    const auto values = worst.values();
    bool pass = true;
    for (std::size_t m = 0; m < values.size(); ++m) {
      const bool ok = values[m] <= threshold;
      pass = pass && ok;
      report << "worst " << tasks::GradcheckReport::kMethods[m] << ' ' << format_double(values[m])
             << (ok ? " ok" : " FAIL") << '\n';
    }
    report << "result " << (pass ? "PASS" : "FAIL");
    if (!pass) report << " worst_method=" << worst.worst_method();
    report << '\n';

    auto out = open_output(options.out_dir, "gradcheck.txt");
    out << report.str();
    if (!pass)
      diag << "gradcheck: failed, worst method " << worst.worst_method() << " ("
           << format_double(worst.worst()) << " > " << format_double(threshold) << ")\n";
    return pass ? kExitOk : kExitNumerical;
  });
}

std::vector<SweepCell> sweep_cells(const ExperimentConfig& config) {
  const auto& s = config.sweep;
  const auto& o = config.optimizer;
  const std::vector<int> Ks = s.K.empty() ? std::vector<int>{o.K} : s.K;
  const std::vector<int> Ns = s.N.empty() ? std::vector<int>{o.N} : s.N;
  const std::vector<std::size_t> Bs =
      s.batch_size.empty() ? std::vector<std::size_t>{o.batch_size} : s.batch_size;
  const std::vector<hypergrad::EstimatorKind> Es =
      s.estimator.empty() ? std::vector<hypergrad::EstimatorKind>{o.estimator} : s.estimator;
  std::vector<SweepCell> cells;
  for (int K : Ks)
    for (int N : Ns)
      for (auto B : Bs)
        for (auto E : Es) {
          SweepCell c;
          c.K = K;
          c.N = N;
          c.batch_size = B;
          c.estimator = E;
          c.repetitions = s.repetitions;
          cells.push_back(c);
        }
  return cells;
}

std::uint64_t cell_seed(std::uint64_t base, const SweepCell& cell, int rep) {
  return Rng(base)
      .split({static_cast<std::uint64_t>(cell.K), static_cast<std::uint64_t>(cell.N),
              static_cast<std::uint64_t>(cell.batch_size),
              static_cast<std::uint64_t>(cell.estimator), static_cast<std::uint64_t>(rep)})
      .key();
}

void run_sweep_cell(const ExperimentConfig& config, const tasks::Family& family, SweepCell& cell,
                    int workers) {
  optimizer::OuterConfig oc = config.optimizer;
  oc.K = cell.K;
  oc.N = cell.N;
  oc.batch_size = cell.batch_size;
  oc.estimator = cell.estimator;
  oc.validate();

  optimizer::RunOptions opts;
  opts.workers = workers;
  opts.theta0 = config.theta0;
  opts.exact_every = config.output.resolved_exact_every(family.task_dim());

  double running = 0.0, tail = 0.0, final_err = 0.0;
  bool have_exact = true, have_err = true;
  cell.counters = {};
  for (int rep = 0; rep < cell.repetitions; ++rep) {
    oc.seed = cell_seed(config.optimizer.seed, cell, rep);
    const auto result = optimizer::run_algorithm1(family, oc, opts);
    double sum = 0.0, tail_sum = 0.0;
    int n = 0, n_tail = 0;
    const std::size_t T = result.records.size();
    const std::size_t tail_start = T > static_cast<std::size_t>(config.sweep.tail)
                                       ? T - static_cast<std::size_t>(config.sweep.tail)
                                       : 0;
    for (std::size_t i = 0; i < T; ++i) {
      const auto& g = result.records[i].grad_exact_norm;
      if (!g) continue;
      sum += *g * *g;
      ++n;
      if (i >= tail_start) {
        tail_sum += *g * *g;
        ++n_tail;
      }
    }
    if (n == 0 || n_tail == 0) have_exact = false;
    else {
      running += sum / n;
      tail += tail_sum / n_tail;
    }
    const auto& last_err = result.records.back().estimator_error;
    if (last_err) final_err += *last_err;
    else have_err = false;
    cell.counters += result.counters;
    cell.memory = result.records.back().memory;
  }
  const double reps = cell.repetitions;
  if (have_exact) {
    cell.running_mean_grad_sq = running / reps;
    cell.tail_mean_grad_sq = tail / reps;
  }
  if (have_err) cell.final_estimator_error = final_err / reps;
}

std::string sweep_header() {
  return "K,N,batch_size,estimator,repetitions,running_mean_grad_sq,tail_mean_grad_sq,"
         "final_estimator_error,workspace_floats,trajectory_floats,memory_total,"
         "n_grad_f_theta,n_grad_f_phi,n_grad_g_phi,n_hvp,n_jvp,evals_total";
}

std::string sweep_row(const SweepCell& c) {
  std::ostringstream row;
  row << c.K << ',' << c.N << ',' << c.batch_size << ',' << hypergrad::to_string(c.estimator)
      << ',' << c.repetitions << ',' << optional_text(c.running_mean_grad_sq) << ','
      << optional_text(c.tail_mean_grad_sq) << ',' << optional_text(c.final_estimator_error)
      << ',' << c.memory.workspace_floats << ',' << c.memory.trajectory_floats << ','
      << c.memory.total() << ',' << c.counters.n_grad_f_theta << ',' << c.counters.n_grad_f_phi
      << ',' << c.counters.n_grad_g_phi << ',' << c.counters.n_hvp << ',' << c.counters.n_jvp
      << ',' << c.counters.total();
  return row.str();
}

int cmd_sweep(const CommandOptions& options, std::ostream& diag) {
  return guarded(diag, "sweep", [&] {
    const ExperimentConfig cfg = load(options);
    const auto& s = cfg.sweep;
    if (!s.present || (s.K.empty() && s.N.empty() && s.batch_size.empty() && s.estimator.empty()))
      throw ConfigError("sweep: no sweep axes given");
    const tasks::Family family(cfg.family);
    auto cells = sweep_cells(cfg);
    if (options.only_cell) {
      if (*options.only_cell >= cells.size())
        throw ConfigError("sweep: cell index " + std::to_string(*options.only_cell) +
                          " out of range (" + std::to_string(cells.size()) + " cells)");
      cells = {cells[*options.only_cell]};
    }
    // Cells are independent; parallelism across cells cannot change any row.
    const int workers = options.workers.value_or(cfg.workers);
    parallel_for(cells.size(), workers,
                 [&](std::size_t i) { run_sweep_cell(cfg, family, cells[i], 1); });

    auto out = open_output(options.out_dir, "sweep.csv");
    out << sweep_header() << '\n';
    for (const auto& c : cells) out << sweep_row(c) << '\n';
    return kExitOk;
  });
}

}  // namespace bilevel::bench
