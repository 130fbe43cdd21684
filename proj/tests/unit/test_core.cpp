#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>

#include "bilevel/core/constants.hpp"
#include "bilevel/core/counters.hpp"
#include "bilevel/core/error.hpp"
#include "bilevel/core/linalg.hpp"
#include "bilevel/core/parallel.hpp"
#include "bilevel/core/rng.hpp"
#include "bilevel/core/strict_yaml.hpp"
#include "oracles.hpp"

using namespace bilevel;

TEST_CASE("spd_solve_oracle on identity and diagonal") {
  Vector b(2);
  b << 3, -1;
  CHECK(spd_solve_oracle(Matrix::Identity(2, 2), b) == b);

  Matrix D = Matrix::Zero(2, 2);
  D.diagonal() << 2, 1;
  Vector b2(2);
  b2 << 2, 1;
  const Vector x = spd_solve_oracle(D, b2);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("spd_solve_oracle residual on seeded 8x8 systems") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Rng r = rng.split(trial);
    const Matrix H = testing::seeded_spd(r, 8, 1.0, 10.0);
    const Vector b = r.normal_vector(8);
    const Vector x = spd_solve_oracle(H, b);
    CHECK((H * x - b).norm() <= 1e-10 * b.norm());
  }
}

TEST_CASE("spd_solve_oracle rejects bad input") {
  Matrix H = Matrix::Identity(3, 3);
  H(0, 1) = 0.5;
  CHECK_THROWS_WITH_AS(static_cast<void>(spd_solve_oracle(H, Vector::Ones(3))),
                       doctest::Contains("asymmetr"), NumericalError);

  Matrix indefinite = Matrix::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  CHECK_THROWS_WITH_AS(static_cast<void>(spd_solve_oracle(indefinite, Vector::Ones(2))),
                       doctest::Contains("pivot"), NumericalError);
}

TEST_CASE("random_spd realises the requested spectrum") {
  Rng rng(5);
  Vector eig(4);
  eig << 1, 2, 3, 7;
  const Matrix H = random_spd(rng, eig);
  CHECK(max_asymmetry(H) == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  for (int i = 0; i < 4; ++i) CHECK(es.eigenvalues()[i] == doctest::Approx(eig[i]).epsilon(1e-12));
}

TEST_CASE("smoothness constant") {
  ProblemConstants c;
  c.mu = c.l_f0 = c.l_f = c.l_g = c.l_g1 = c.l_g2 = 1.0;
  CHECK(compute_smoothness_constant(c) == doctest::Approx(8.0).epsilon(1e-15));

  c.mu = 2.0;
  CHECK(compute_smoothness_constant(c) == doctest::Approx(1 + 1.5 + 0.75 + 0.125).epsilon(1e-15));

  ProblemConstants e;
  const double L = 3.0, mu = 0.5;
  e.mu = mu;
  e.l_f = e.l_g = L;
  e.l_f0 = e.l_g1 = e.l_g2 = 0.0;
  CHECK(compute_smoothness_constant(e) ==
        doctest::Approx(L + 2 * L * L / mu + L * L * L / (mu * mu)).epsilon(1e-15));
}

TEST_CASE("inner iteration floor") {
  ProblemConstants c;
  c.mu = 1.0;
  c.l_g = 4.0;
  CHECK(compute_inner_iteration_floor(c, 0.5) == 3);
  CHECK(compute_inner_iteration_floor(c, 5.0 / 6.0) == 1);

  // independent evaluation over a grid of contraction factors
  for (double m = 0.01; m < 0.99; m += 0.037) {
    const auto expected = static_cast<std::int64_t>(std::ceil(std::log(6.0) / -std::log1p(-m)));
    const auto got = compute_inner_iteration_floor(c, m);
    CHECK(std::abs(got - expected) <= 1);
    CHECK(2.0 * std::pow(1.0 - m, static_cast<double>(got)) <= 1.0 / 3.0 + 1e-12);
  }

  CHECK_THROWS_WITH_AS(static_cast<void>(compute_inner_iteration_floor(c, 1.0)),
                       doctest::Contains("contraction factor out of range"), ConfigError);
  CHECK_THROWS_WITH_AS(static_cast<void>(compute_inner_iteration_floor(c, 0.0)),
                       doctest::Contains("contraction factor out of range"), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(compute_inner_iteration_floor(c, 1e-9)), ConfigError);
  CHECK(compute_inner_iteration_floor(c, 1e-9, 10'000'000'000) > 1'000'000);
}

TEST_CASE("constants validation") {
  ProblemConstants c;
  c.mu = 2.0;
  c.l_g = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.l_g = 2.0;
  CHECK_NOTHROW(c.validate());
  CHECK(c.kappa() == 1.0);
}

namespace {
EvalCounters random_counters(Rng& rng) {
  EvalCounters c;
  c.n_grad_f_theta = rng.below(1000);
  c.n_grad_f_phi = rng.below(1000);
  c.n_grad_g_phi = rng.below(1000);
  c.n_hvp = rng.below(1000);
  c.n_jvp = rng.below(1000);
  return c;
}
}  // namespace

TEST_CASE("merge_counters") {
  const EvalCounters zero;
  EvalCounters x{1, 2, 3, 4, 5};
  CHECK(merge_counters(zero, x) == x);
  EvalCounters y{5, 4, 3, 2, 1};
  CHECK(merge_counters(x, y) == EvalCounters{6, 6, 6, 6, 6});

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_counters(rng), b = random_counters(rng), c = random_counters(rng);
    CHECK(merge_counters(a, merge_counters(b, c)) == merge_counters(merge_counters(a, b), c));
    CHECK(merge_counters(a, b) == merge_counters(b, a));
    CHECK(merge_counters(a, b).total() == a.total() + b.total());
  }
}

TEST_CASE("rng split streams do not depend on parent draws") {
  Rng a(42), b(42);
  for (int i = 0; i < 17; ++i) static_cast<void>(b.normal());
  Rng ca = a.split({3, 7}), cb = b.split({3, 7});
  for (int i = 0; i < 10; ++i) CHECK(ca.normal() == cb.normal());
  CHECK(a.split(1).key() != a.split(2).key());
  CHECK(a.split({1, 2}).key() != a.split({2, 1}).key());
}

TEST_CASE("parallel_for covers every index and rethrows the lowest failure") {
  for (int workers : {1, 2, 5}) {
    std::vector<int> hits(37, 0);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 37);
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

    CHECK_THROWS_WITH(parallel_for(20, workers,
                                   [](std::size_t i) {
                                     if (i == 4 || i == 15) throw Error("fail " + std::to_string(i));
                                   }),
                      "fail 4");
  }
}

TEST_CASE("strict map reports unknown keys with line numbers") {
  const auto node = parse_yaml("alpha: 1\nbeta: [1, 2]\ngamma: 3\n");
  StrictMap m(node, "root");
  CHECK(m.require<int>("alpha") == 1);
  CHECK(m.vector("beta").size() == 2);
  CHECK_THROWS_WITH_AS(m.finish(), "unknown key 'root.gamma' (line 3)", ConfigError);

  StrictMap bad(parse_yaml("x: notanumber\n"), "s");
  CHECK_THROWS_WITH_AS(static_cast<void>(bad.require<double>("x")),
                       doctest::Contains("s.x"), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(parse_yaml("a: [1, 2\n")), ConfigError);
}
