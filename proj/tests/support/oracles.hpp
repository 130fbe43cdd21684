#pragma once

// Test-only reference computations. Everything here is deliberately
// independent of the library's iterative paths: dense matrices, explicit
// products, finite differences.

#include <cmath>
#include <functional>
#include <vector>

#include "bilevel/core/linalg.hpp"
#include "bilevel/core/rng.hpp"
#include "bilevel/tasks/quadratic.hpp"

namespace bilevel::testing {

/// Seeded SPD matrix with eigenvalues spread between lo and hi (both pinned).
inline Matrix seeded_spd(Rng& rng, Index n, double lo, double hi, bool log_spaced = false) {
  Vector eig(n);
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform(0.0, 1.0);
    eig[i] = log_spaced ? lo * std::pow(hi / lo, u) : lo + (hi - lo) * u;
  }
  eig[0] = lo;
  if (n > 1) eig[1] = hi;
  return random_spd(rng, eig);
}

inline double energy_norm(const Matrix& H, const Vector& e) { return std::sqrt(e.dot(H * e)); }

/// Upper objective F(theta) = mean_i f_i(theta, phi*_i(theta)) with phi* by dense solve.
inline double quadratic_upper_objective(const std::vector<tasks::QuadraticTask>& tasks,
                                        const Vector& theta) {
  double sum = 0.0;
  for (const auto& t : tasks) {
    const auto& d = t.data();
    const Vector phi_star = -spd_solve_oracle(d.A, d.C * theta + d.c);
    sum += t.value_f(theta, phi_star);
  }
  return sum / static_cast<double>(tasks.size());
}

inline Vector central_difference(const std::function<double(const Vector&)>& fn, const Vector& x,
                                 double eps) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector up = x, down = x;
    up[i] += eps;
    down[i] -= eps;
    g[i] = (fn(up) - fn(down)) / (2 * eps);
  }
  return g;
}

/// Iterative-differentiation hypergradient of one quadratic task by explicit
/// left-to-right matrix products over the GD trajectory from phi0.
inline Vector itd_dense(const tasks::QuadraticTask& task, const Vector& theta, const Vector& phi0,
                        int K, double lambda) {
  const auto& d = task.data();
  const Index q = d.A.rows();
  std::vector<Vector> phis{phi0};
  for (int k = 0; k < K; ++k) phis.push_back(phis.back() - lambda * (d.A * phis.back() + d.C * theta + d.c));
  const Vector grad_f_phi = phis.back() - d.d;
  const Matrix step = Matrix::Identity(q, q) - lambda * d.A;
  Vector out = task.grad_f_theta(theta, phis.back());
  for (int k = 0; k < K; ++k) {
    Matrix prod = Matrix::Identity(q, q);
    for (int j = k + 1; j <= K - 1; ++j) prod = prod * step;
    out -= lambda * d.C.transpose() * prod * grad_f_phi;
  }
  return out;
}

}  // namespace bilevel::testing
