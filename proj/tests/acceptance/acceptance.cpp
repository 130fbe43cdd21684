// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bilevel/bench/commands.hpp"
#include "bilevel/bench/config.hpp"
#include "bilevel/cg/cg.hpp"
#include "bilevel/core/constants.hpp"
#include "bilevel/core/linalg.hpp"
#include "bilevel/hypergrad/hypergrad.hpp"
#include "bilevel/optimizer/algorithm.hpp"
#include "bilevel/optimizer/memory.hpp"
#include "bilevel/tasks/family.hpp"
#include "oracles.hpp"

using namespace bilevel;
using hypergrad::EstimatorKind;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = BILEVEL_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bilevel_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

cg::Operator dense(const Matrix& H) {
  return [&H](const Vector& v) { return Vector(H * v); };
}

tasks::QuadraticTask scalar_task() {
  tasks::QuadraticTask::Data d;
  d.A = Matrix::Constant(1, 1, 2.0);
  d.C = Matrix::Constant(1, 1, 1.0);
  d.c = Vector::Zero(1);
  d.d = Vector::Constant(1, 1.0);
  d.s = Vector::Zero(1);
  return tasks::QuadraticTask(d);
}

std::vector<const TaskOracle*> pointers(const std::vector<tasks::QuadraticTask>& ts) {
  std::vector<const TaskOracle*> out;
  for (const auto& t : ts) out.push_back(&t);
  return out;
}

tasks::Family make_family(std::uint64_t seed, Index p, Index q, std::size_t n, double mu, double l_g) {
  tasks::QuadraticFamilyParams fp;
  fp.seed = seed;
  fp.p = p;
  fp.q = q;
  fp.n_tasks = n;
  fp.mu = mu;
  fp.l_g = l_g;
  tasks::FamilySpec spec;
  spec.params = fp;
  return tasks::Family(spec);
}

// ---------------------------------------------------------------------------

Outcome cg_finite_termination() {
  // Systems drawn like the quadratic family: eigenvalues uniform in [1, kappa]
  // with both ends pinned, kappa cycling through 10, 100, 1000.
  Rng rng(1);
  const double kappas[] = {10.0, 100.0, 1000.0};
  double worst = 0.0;
  int failures = 0;
  for (int s = 0; s < 50; ++s) {
    Rng r = rng.split(static_cast<std::uint64_t>(s));
    const Index q = 2 + static_cast<Index>(r.below(49));
    const Matrix H = testing::seeded_spd(r, q, 1.0, kappas[s % 3]);
    const Vector b = r.normal_vector(q);
    cg::CgOptions o;
    o.tol = 0.0;
    const auto res = cg::cg_solve(dense(H), b, Vector::Zero(q), static_cast<int>(q), o);
    const double rel = (b - H * res.v).norm() / b.norm();
    worst = std::max(worst, rel);
    if (!(rel <= 1e-8)) ++failures;
  }
  return {failures == 0, fmt("50 systems, worst |r|/|b| = %.3g, %d above 1e-8", worst, failures)};
}

Outcome cg_kappa_rate() {
  Rng rng(2);
  int violations = 0, checks = 0;
  double tightest = 0.0;
  for (int s = 0; s < 20; ++s) {
    const double kappa = s % 2 == 0 ? 10.0 : 100.0;
    Rng r = rng.split(static_cast<std::uint64_t>(s));
    const Index q = 10 + static_cast<Index>(r.below(41));
    const Matrix H = testing::seeded_spd(r, q, 1.0, kappa, true);
    const Vector b = r.normal_vector(q);
    const Vector star = spd_solve_oracle(H, b);
    const Vector v0 = r.normal_vector(q);
    const double e0 = testing::energy_norm(H, v0 - star);
    const double base = (std::sqrt(kappa) - 1) / (std::sqrt(kappa) + 1);
    cg::CgOptions o;
    o.tol = 0.0;
    o.observer = [&](const cg::CgState& st) {
      const double err = testing::energy_norm(H, st.v - star);
      const double bound = 2 * std::pow(base, st.iter) * e0;
      // the dense reference itself carries relative error around 1e-14
      ++checks;
      if (err > bound + 1e-12 * e0) ++violations;
      if (bound > 1e-10 * e0) tightest = std::max(tightest, err / bound);
    };
    static_cast<void>(cg::cg_solve(dense(H), b, v0, static_cast<int>(q), o));
  }
  return {violations == 0 && checks > 0,
          fmt("20 systems, %d step checks, %d violations, max err/bound = %.3g", checks, violations,
              tightest)};
}

Outcome hypergradient_exactness() {
  double worst_exact = 0.0;
  bool monotone = true, geometric = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double mu = 1.0, l_g = 5.0, lambda = 1.0 / l_g;
    tasks::QuadraticFamilyParams fp;
    fp.seed = seed;
    fp.p = 3;
    fp.q = 8;
    fp.n_tasks = 8;
    fp.mu = mu;
    fp.l_g = l_g;
    const auto ts = tasks::make_quadratic_family(fp);
    const auto ptrs = pointers(ts);
    Rng rng(100 + seed);
    const Vector theta = rng.normal_vector(3);
    const Vector exact = tasks::quadratic_exact_hypergradient(ts, theta);

    std::vector<Vector> star, warm;
    for (const auto& t : ts) {
      const auto& d = t.data();
      star.push_back(-spd_solve_oracle(d.A, d.C * theta + d.c));
      warm.push_back(rng.normal_vector(8));
    }
    const auto out = hypergrad::implicit_estimate(ptrs, theta, star, warm, 8, 0.0);
    worst_exact = std::max(worst_exact, (out.estimate.grad - exact).norm() / exact.norm());

    const int Ks[] = {1, 2, 4, 8, 16, 32};
    std::vector<double> errors;
    for (int K : Ks) {
      std::vector<Vector> phis, zero;
      for (const auto& t : ts) {
        EvalCounters c;
        phis.push_back(optimizer::lower_solve(CountedOracle(t, c), theta, Vector::Zero(8), K, lambda, false).phi);
        zero.push_back(Vector::Zero(8));
      }
      const auto est = hypergrad::implicit_estimate(ptrs, theta, phis, zero, 8, 0.0);
      errors.push_back((est.estimate.grad - exact).norm());
    }
    const double rho = std::max(std::abs(1 - lambda * mu), std::abs(1 - lambda * l_g));
    for (std::size_t i = 1; i < errors.size(); ++i) {
      if (errors[i] > errors[i - 1] + 1e-10) monotone = false;
      if (Ks[i] >= 4 && errors[i] > rho * errors[i - 1] + 1e-10) geometric = false;
    }
  }
  return {worst_exact <= 1e-8 && monotone && geometric,
          fmt("worst relative error with exact inner solutions %.3g; monotone in K: %s; "
              "per-doubling factor within rho: %s",
              worst_exact, monotone ? "yes" : "no", geometric ? "yes" : "no")};
}

Outcome itd_implicit_cross_validation() {
  const std::vector<tasks::QuadraticTask> ts{scalar_task()};
  const auto ptrs = pointers(ts);
  const Vector theta = Vector::Constant(1, 4.0);
  const double lambda = 0.25;
  EvalCounters c;
  const CountedOracle counted(ts[0], c);
  const auto k1 = optimizer::lower_solve(counted, theta, Vector::Zero(1), 1, lambda, true);
  const auto k200 = optimizer::lower_solve(counted, theta, Vector::Zero(1), 200, lambda, true);

  const std::vector<hypergrad::LowerTrajectory> tr1{*k1.trajectory}, tr200{*k200.trajectory};
  const double itd1 = hypergrad::itd_estimate(ptrs, theta, tr1, lambda).grad[0];
  const double itd200 = hypergrad::itd_estimate(ptrs, theta, tr200, lambda).grad[0];
  const std::vector<Vector> phi1{k1.phi}, warm{Vector::Zero(1)};
  const double imp1 = hypergrad::implicit_estimate(ptrs, theta, phi1, warm, 50, 1e-10).estimate.grad[0];
  const double exact = hypergrad::exact_hypergradient(ptrs, theta)[0];
  const bool ok = std::abs(itd1 - 0.5) <= 1e-12 && std::abs(imp1 - 1.0) <= 1e-12 &&
                  std::abs(exact - 1.5) <= 1e-12 && std::abs(itd200 - exact) <= 1e-6;
  return {ok, fmt("ITD(K=1) = %.17g, implicit(K=1) = %.17g, exact = %.17g, |ITD(K=200) - exact| = %.3g",
                  itd1, imp1, exact, std::abs(itd200 - exact))};
}

Outcome deterministic_convergence() {
  const auto family = make_family(7, 5, 10, 8, 1.0, 2.0);
  const auto& k = family.constants();
  const double lambda_phi = 1.0 / k.l_g;
  const auto K0 = compute_inner_iteration_floor(k, lambda_phi);
  optimizer::OuterConfig c;
  c.T = 2000;
  c.K = static_cast<int>(std::max<std::int64_t>(K0, static_cast<std::int64_t>(std::ceil(k.kappa()))));
  c.N = 10;
  c.batch_size = 8;
  c.tol_cg = 0.0;
  const auto res = optimizer::run_algorithm1(family, c);
  std::vector<double> prefix{0.0};
  for (const auto& r : res.records) prefix.push_back(prefix.back() + *r.grad_exact_norm * *r.grad_exact_norm);
  const double mean200 = prefix[201] / 201.0, mean400 = prefix[401] / 401.0;
  const double ratio = mean200 / mean400;
  const double final_norm = res.final_grad_exact_norm.value();
  return {ratio >= 1.6 && ratio <= 2.5 && final_norm <= 1e-4,
          fmt("K = %d (K0 = %lld, kappa = %.3g), lambda_theta = %.4g; running-mean ratio T=200/T=400 = %.4f; "
              "|grad F(theta_2000)| = %.3g",
              c.K, static_cast<long long>(K0), k.kappa(), res.lambda_theta, ratio, final_norm)};
}

Outcome stochastic_floor() {
  const auto dir = scratch("floor");
  bench::CommandOptions o;
  o.config_path = kConfigDir + "/sweep_noise.yaml";
  o.out_dir = dir;
  std::ostringstream diag;
  if (bench::cmd_sweep(o, diag) != bench::kExitOk) return {false, "sweep failed: " + diag.str()};
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  std::vector<std::pair<std::size_t, double>> floors;
  int reps = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    floors.emplace_back(std::stoul(cells[col("batch_size")]), std::stod(cells[col("tail_mean_grad_sq")]));
    reps = std::stoi(cells[col("repetitions")]);
  }
  std::sort(floors.begin(), floors.end());
  if (floors.size() != 3 || floors[0].first != 4 || floors[2].first != 64)
    return {false, "unexpected sweep rows"};
  const bool decreasing = floors[0].second > floors[1].second && floors[1].second > floors[2].second;
  const double ratio = floors[0].second / floors[2].second;
  return {decreasing && ratio >= 4.0 && reps >= 10,
          fmt("%d repetitions; tail means |B|=4: %.4g, 16: %.4g, 64: %.4g; ratio 4/64 = %.3g", reps,
              floors[0].second, floors[1].second, floors[2].second, ratio)};
}

Outcome memory_model() {
  optimizer::OuterConfig c;
  const Index p = 4, q = 20;  // q >= 5p
  c.batch_size = 1;
  c.estimator = EstimatorKind::implicit_cg;
  bool invariant = true;
  c.K = 5;
  const auto base = optimizer::memory_report(c, p, q);
  for (int K : {10, 100, 1000}) {
    c.K = K;
    invariant = invariant && optimizer::memory_report(c, p, q) == base;
  }
  c.estimator = EstimatorKind::itd;
  c.K = 5;
  const auto itd5 = optimizer::memory_report(c, p, q);
  const double ratio = static_cast<double>(itd5.total()) / static_cast<double>(base.total());
  bool linear = true;
  for (int K : {1, 5, 10, 100, 1000}) {
    c.K = K;
    const auto r = optimizer::memory_report(c, p, q);
    linear = linear && r.trajectory_floats == std::uint64_t(K + 1) * q &&
             r.workspace_floats == itd5.workspace_floats;
  }
  // Under this counting model ITD(K) / implicit = (3p + 2q + (K+1)q) / (3p + 6q),
  // which stays below 4/3 at K = 5 for every q >= 5p.
  return {invariant && linear && ratio >= 2.0,
          fmt("implicit identical over K in {5,10,100,1000}: %s; ITD linear in K: %s; "
              "ITD(K=5)/implicit at p=%ld q=%ld = %llu/%llu = %.3f (need >= 2)",
              invariant ? "yes" : "no", linear ? "yes" : "no", static_cast<long>(p),
              static_cast<long>(q), static_cast<unsigned long long>(itd5.total()),
              static_cast<unsigned long long>(base.total()), ratio)};
}

Outcome evaluation_counting() {
  const auto family = make_family(7, 5, 10, 8, 1.0, 2.0);
  auto phi_side_per_iter = [&](int K, std::size_t B) {
    optimizer::OuterConfig c;
    c.T = 3;
    c.K = K;
    c.N = 10;
    c.batch_size = B;
    c.tol_cg = 0.0;
    const auto res = optimizer::run_algorithm1(family, c);
    const auto a = res.records[1].counters.phi_side() - res.records[0].counters.phi_side();
    const auto b = res.records[2].counters.phi_side() - res.records[1].counters.phi_side();
    return a == b ? static_cast<double>(a) : -1.0;
  };
  // affine in K at |B| = 4
  const double k2 = phi_side_per_iter(2, 4), k5 = phi_side_per_iter(5, 4), k11 = phi_side_per_iter(11, 4);
  const double slope = (k5 - k2) / 3.0, intercept = k2 - 2 * slope;
  const bool affine = k2 > 0 && k11 == intercept + 11 * slope;
  // linear through the origin in |B| at K = 5
  const double b1 = phi_side_per_iter(5, 1), b3 = phi_side_per_iter(5, 3), b8 = phi_side_per_iter(5, 8);
  const double per_task = (b3 - b1) / 2.0;
  const bool linear = b1 > 0 && b1 - per_task == 0.0 && b8 == 8 * per_task;

  // evaluations to an eps-solution on the deterministic benchmark
  const auto& k = family.constants();
  optimizer::OuterConfig c;
  c.T = 80000;
  c.K = static_cast<int>(std::max<std::int64_t>(compute_inner_iteration_floor(k, 1.0 / k.l_g),
                                                static_cast<std::int64_t>(std::ceil(k.kappa()))));
  c.N = 10;
  c.batch_size = 8;
  c.tol_cg = 0.0;
  const auto res = optimizer::run_algorithm1(family, c);
  const auto e2 = optimizer::epsilon_solution_check(res.records, 1e-2);
  const auto e3 = optimizer::epsilon_solution_check(res.records, 1e-3);
  if (!e2.reached || !e3.reached)
    return {false, fmt("eps-solution not reached within T = %d", c.T)};
  const double n2 = static_cast<double>(res.records[e2.T_needed - 1].counters.total());
  const double n3 = static_cast<double>(res.records[e3.T_needed - 1].counters.total());
  const double scale = n3 / n2;
  return {affine && linear && scale >= 10.0 / 3.0 && scale <= 30.0,
          fmt("phi-side per iteration K=2,5,11: %.0f,%.0f,%.0f (affine: %s); |B|=1,3,8: %.0f,%.0f,%.0f "
              "(linear: %s); evals to eps 1e-2: %.0f (T=%d), 1e-3: %.0f (T=%d), ratio %.3f",
              k2, k5, k11, affine ? "yes" : "no", b1, b3, b8, linear ? "yes" : "no", n2, e2.T_needed,
              n3, e3.T_needed, scale)};
}

Outcome oracle_integrity() {
  std::string detail;
  bool ok = true;
  for (const auto& [name, bound] : {std::pair{"quadratic", 1e-8}, std::pair{"sinusoid", 1e-5}}) {
    const auto dir = scratch(std::string("gradcheck_") + name);
    bench::CommandOptions o;
    o.config_path = kConfigDir + "/" + name + ".yaml";
    o.out_dir = dir;
    std::ostringstream diag;
    const int code = bench::cmd_gradcheck(o, diag);
    // worst relative error over the five methods, read back from the report
    std::istringstream report(slurp(dir / "gradcheck.txt"));
    std::string line;
    double worst = 0.0;
    int probes = 0;
    while (std::getline(report, line)) {
      if (line.rfind("probe ", 0) == 0) ++probes;
      if (line.rfind("worst ", 0) == 0) {
        std::istringstream ls(line);
        std::string tag, method;
        double value = 0;
        ls >> tag >> method >> value;
        worst = std::max(worst, value);
      }
    }
    ok = ok && code == bench::kExitOk && probes == 5 && worst <= bound;
    detail += fmt("%s: exit %d, %d probes, worst %.3g; ", name, code, probes, worst);
  }
  return {ok, detail};
}

Outcome determinism() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"quadratic", "sinusoid"}) {
    std::vector<std::string> logs;
    for (int variant = 0; variant < 3; ++variant) {
      const auto dir = scratch(std::string("det_") + name + std::to_string(variant));
      bench::CommandOptions o;
      o.config_path = kConfigDir + "/" + name + ".yaml";
      o.out_dir = dir;
      if (variant == 2) o.workers = 4;
      std::ostringstream diag;
      if (bench::cmd_run(o, diag) != bench::kExitOk) return {false, diag.str()};
      logs.push_back(slurp(dir / "run.jsonl"));
    }
    const bool same = !logs[0].empty() && logs[0] == logs[1] && logs[0] == logs[2];
    ok = ok && same;
    detail += fmt("%s: %zu bytes, repeat and 4-worker logs %s; ", name, logs[0].size(),
                  same ? "identical" : "DIFFER");
  }
  return {ok, detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "cg finite termination", 1, cg_finite_termination},
      {2, "cg kappa rate", 1, cg_kappa_rate},
      {3, "hypergradient exactness", 1, hypergradient_exactness},
      {4, "itd/implicit cross-validation", 1, itd_implicit_cross_validation},
      {5, "deterministic convergence", 10, deterministic_convergence},
      {6, "stochastic floor", 60, stochastic_floor},
      {7, "memory model", 1, memory_model},
      {8, "evaluation counting", 30, evaluation_counting},
      {9, "oracle integrity", 5, oracle_integrity},
      {10, "determinism", 10, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = out.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %2d %s: %s [%.2f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
