#include "bilevel/optimizer/algorithm.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

#include "bilevel/core/error.hpp"
#include "bilevel/core/parallel.hpp"
#include "bilevel/core/rng.hpp"

namespace bilevel::optimizer {

namespace {

constexpr std::uint64_t kBatchStream = 0x6261746368ULL;  // "batch"
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;  // "noise"
constexpr double kDivergence = 1e12;

}  // namespace

std::string_view to_string(Mode m) {
  return m == Mode::deterministic ? "deterministic" : "stochastic";
}

std::string_view to_string(WarmStart w) {
  switch (w) {
    case WarmStart::none: return "none";
    case WarmStart::slot: return "slot";
    case WarmStart::task_id: return "task_id";
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  if (name == "deterministic") return Mode::deterministic;
  if (name == "stochastic") return Mode::stochastic;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

WarmStart parse_warm_start(std::string_view name) {
  for (auto w : {WarmStart::none, WarmStart::slot, WarmStart::task_id})
    if (to_string(w) == name) return w;
  throw ConfigError("unknown warm_start '" + std::string(name) + "'");
}

void OuterConfig::validate() const {
  if (T < 1) throw ConfigError("optimizer.T must be >= 1");
  if (N < 1) throw ConfigError("optimizer.N must be >= 1");
  if (batch_size < 1) throw ConfigError("optimizer.batch_size must be >= 1");
  if (K < 0 || (K == 0 && estimator != EstimatorKind::first_order))
    throw ConfigError("optimizer.K must be >= 1 (K = 0 only with first_order)");
  if (lambda_phi && !(*lambda_phi > 0.0)) throw ConfigError("optimizer.lambda_phi must be positive");
  // lambda_theta = 0 freezes the outer iterate, which is allowed for diagnostics.
  if (lambda_theta && !(*lambda_theta >= 0.0))
    throw ConfigError("optimizer.lambda_theta must be non-negative");
  if (!(tol_cg >= 0.0)) throw ConfigError("optimizer.tol_cg must be non-negative");
}

std::pair<double, double> default_stepsizes(const ProblemConstants& c) {
  return {1.0 / (2.0 * compute_smoothness_constant(c)), 1.0 / c.l_g};
}

LowerSolveResult lower_solve(const CountedOracle& oracle, const Vector& theta, const Vector& phi0,
                             int K, double lambda_phi, bool keep_trajectory) {
  if (K < 0) throw ConfigError("lower_solve: K must be non-negative");
  LowerSolveResult out;
  out.phi = phi0;
  if (keep_trajectory) {
    out.trajectory.emplace();
    out.trajectory->theta = theta;
    out.trajectory->snapshots.reserve(static_cast<std::size_t>(K) + 1);
    out.trajectory->snapshots.push_back(phi0);
  }
  for (int k = 0; k < K; ++k) {
    out.phi -= lambda_phi * oracle.grad_g_phi(theta, out.phi);
    if (!out.phi.allFinite())
      throw NumericalError("lower_solve: non-finite iterate at step " + std::to_string(k + 1));
    if (keep_trajectory) out.trajectory->snapshots.push_back(out.phi);
  }
  return out;
}

RunResult run_algorithm1(const tasks::Family& family, const OuterConfig& config,
                         const RunOptions& options) {
  config.validate();
  const std::size_t B = config.batch_size;
  if (config.mode == Mode::deterministic && family.size() < B)
    throw ConfigError("deterministic mode needs at least batch_size tasks in the family");
  if (config.estimator == EstimatorKind::exact && !family.has_exact_hypergradient())
    throw ConfigError("exact estimator needs a family with a closed-form hypergradient");

  const auto [default_theta_step, default_phi_step] = default_stepsizes(family.constants());
  RunResult result;
  result.lambda_theta = config.lambda_theta.value_or(default_theta_step);
  result.lambda_phi = config.lambda_phi.value_or(default_phi_step);
  const double lambda_phi = result.lambda_phi;
  if (lambda_phi * family.constants().l_g > 1.0 + 1e-12) {
    std::ostringstream w;
    w << "lambda_phi * l_g = " << lambda_phi * family.constants().l_g
      << " exceeds 1; lower-level descent may not contract";
    result.warnings.push_back(w.str());
  }

  const Index p = family.meta_dim();
  const Index q = family.task_dim();
  Vector theta = options.theta0.value_or(family.initial_theta());
  if (theta.size() != p) throw ConfigError("theta0 has wrong dimension");

  const Rng root(config.seed);
  const bool noisy = !family.noise().zero();
  const bool exact_available = family.has_exact_hypergradient();
  const MemoryReport memory = memory_report(config, p, q);
  const bool keep_trajectory = config.estimator == EstimatorKind::itd;

  // Warm-start state: by slot, or by pool index.
  std::vector<std::optional<Vector>> phi_warm(config.warm_start == WarmStart::task_id ? family.size() : B);
  std::vector<std::optional<Vector>> v_warm(phi_warm.size());

  std::vector<std::size_t> all_indices(family.size());
  for (std::size_t i = 0; i < all_indices.size(); ++i) all_indices[i] = i;

  if (options.keep_theta_path) result.theta_path.push_back(theta);
  result.records.reserve(static_cast<std::size_t>(config.T));

  for (int t = 0; t < config.T; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const auto tu = static_cast<std::uint64_t>(t);

    std::vector<std::size_t> batch(B);
    if (config.mode == Mode::deterministic) {
      for (std::size_t i = 0; i < B; ++i) batch[i] = i;
    } else {
      Rng rng = root.split({kBatchStream, tu});
      for (auto& idx : batch) idx = static_cast<std::size_t>(rng.below(family.size()));
    }

    std::vector<std::unique_ptr<tasks::NoisyOracle>> noisy_views;
    std::vector<const TaskOracle*> oracles(B);
    std::vector<const TaskOracle*> clean(B);
    for (std::size_t i = 0; i < B; ++i) {
      clean[i] = &family.task(batch[i]);
      if (noisy) {
        noisy_views.push_back(std::make_unique<tasks::NoisyOracle>(
            *clean[i], family.noise(), root.split({kNoiseStream, tu, i})));
        oracles[i] = noisy_views.back().get();
      } else {
        oracles[i] = clean[i];
      }
    }

    auto warm_key = [&](std::size_t i) {
      return config.warm_start == WarmStart::task_id ? batch[i] : i;
    };
    std::vector<Vector> phi0(B), v0(B);
    for (std::size_t i = 0; i < B; ++i) {
      const bool carry = config.warm_start != WarmStart::none;
      const auto& pw = phi_warm[warm_key(i)];
      const auto& vw = v_warm[warm_key(i)];
      phi0[i] = carry && pw ? *pw : family.initial_phi();
      v0[i] = carry && vw ? *vw : Vector(Vector::Zero(q));
    }

    // Lower level, one task per slot.
    std::vector<EvalCounters> lower_counters(B);
    std::vector<LowerSolveResult> lower(B);
    try {
      parallel_for(B, options.workers, [&](std::size_t i) {
        lower[i] = lower_solve(CountedOracle(*oracles[i], lower_counters[i]), theta, phi0[i],
                               config.K, lambda_phi, keep_trajectory);
      });
    } catch (const Error& e) {
      throw NumericalError("iteration " + std::to_string(t) + ": " + e.what());
    }
    std::vector<Vector> phi_final(B);
    for (std::size_t i = 0; i < B; ++i) phi_final[i] = lower[i].phi;

    hypergrad::HypergradientEstimate estimate;
    std::vector<Vector> v_out;
    try {
      switch (config.estimator) {
        case EstimatorKind::implicit_cg: {
          auto out = hypergrad::implicit_estimate(oracles, theta, phi_final, v0, config.N,
                                                  config.tol_cg, options.workers);
          estimate = std::move(out.estimate);
          v_out = std::move(out.v_out);
          break;
        }
        case EstimatorKind::itd: {
          std::vector<hypergrad::LowerTrajectory> trajectories(B);
          for (std::size_t i = 0; i < B; ++i) trajectories[i] = std::move(*lower[i].trajectory);
          estimate = hypergrad::itd_estimate(oracles, theta, trajectories, lambda_phi, options.workers);
          break;
        }
        case EstimatorKind::first_order:
          estimate = hypergrad::first_order_estimate(oracles, theta, phi_final);
          break;
        case EstimatorKind::exact:
          estimate = hypergrad::exact_estimate(clean, theta);
          break;
      }
    } catch (const Error& e) {
      throw NumericalError("iteration " + std::to_string(t) + ": " + e.what());
    }
    estimate.K_used = config.K;

    for (const auto& c : lower_counters) result.counters += c;
    result.counters += estimate.counters_delta;

    RunRecord rec;
    rec.t = t;
    rec.grad_est_norm = estimate.grad.norm();
    rec.counters = result.counters;
    rec.memory = memory;
    const bool exact_now = exact_available && options.exact_every > 0 && t % options.exact_every == 0;
    if (exact_now) {
      const auto scope = config.mode == Mode::deterministic
                             ? std::span<const std::size_t>(batch)
                             : std::span<const std::size_t>(all_indices);
      rec.grad_exact_norm = family.exact_hypergradient(theta, scope).norm();
      rec.estimator_error = (estimate.grad - family.exact_hypergradient(theta, batch)).norm();
    }
    if (options.exact_every > 0 && t % options.exact_every == 0) {
      double gap = 0.0;
      bool have_gap = true;
      for (std::size_t i = 0; i < B && have_gap; ++i) {
        const auto star = clean[i]->exact_phi_star(theta);
        if (!star) have_gap = false;
        else gap += (phi_final[i] - *star).norm();
      }
      if (have_gap) rec.phi_gap = gap / static_cast<double>(B);
    }

    for (std::size_t i = 0; i < B; ++i) {
      phi_warm[warm_key(i)] = phi_final[i];
      if (!v_out.empty()) v_warm[warm_key(i)] = v_out[i];
    }

    theta -= result.lambda_theta * estimate.grad;
    if (!theta.allFinite() || theta.norm() > kDivergence)
      throw NumericalError("iteration " + std::to_string(t) + ": outer divergence");
    if (options.keep_theta_path) result.theta_path.push_back(theta);

    rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    if (options.on_record) options.on_record(rec);
    result.records.push_back(std::move(rec));
  }

  result.theta = theta;
  if (exact_available && options.exact_every > 0) {
    if (config.mode == Mode::deterministic) {
      std::vector<std::size_t> first(B);
      for (std::size_t i = 0; i < B; ++i) first[i] = i;
      result.final_grad_exact_norm = family.exact_hypergradient(theta, first).norm();
    } else {
      result.final_grad_exact_norm = family.exact_hypergradient(theta).norm();
    }
  }
  return result;
}

EpsilonCheck epsilon_solution_check(const std::vector<RunRecord>& records, double eps) {
  EpsilonCheck out;
  double sum = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].grad_exact_norm)
      throw ConfigError("epsilon_solution_check: record " + std::to_string(i) +
                        " has no exact gradient norm");
    const double g = *records[i].grad_exact_norm;
    sum += g * g;
    if (!out.reached && sum / static_cast<double>(i + 1) <= eps) {
      out.reached = true;
      out.T_needed = static_cast<int>(i + 1);
    }
  }
  return out;
}

}  // namespace bilevel::optimizer
