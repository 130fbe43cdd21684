#include "bilevel/tasks/quadratic.hpp"

#include <cmath>

#include "bilevel/core/error.hpp"
#include "bilevel/core/linalg.hpp"
#include "bilevel/core/rng.hpp"

namespace bilevel::tasks {

QuadraticTask::QuadraticTask(Data data) : data_(std::move(data)) {
  const Index q = data_.A.rows();
  const Index p = data_.C.cols();
  if (data_.A.cols() != q || data_.C.rows() != q || data_.c.size() != q ||
      data_.d.size() != q || data_.s.size() != p)
    throw ConfigError("quadratic task: inconsistent dimensions");
  if (data_.w < 0.0) throw ConfigError("quadratic task: upper weight must be non-negative");
  if (max_asymmetry(data_.A) > 1e-12 * std::max(1.0, data_.A.cwiseAbs().maxCoeff()))
    throw ConfigError("quadratic task: A must be symmetric");
  chol_.compute(data_.A);
  if (chol_.info() != Eigen::Success)
    throw ConfigError("quadratic task: A must be positive definite");
}

double QuadraticTask::value_f(const Vector& theta, const Vector& phi) const {
  double v = 0.5 * (phi - data_.d).squaredNorm() + 0.5 * data_.w * (theta - data_.s).squaredNorm();
  if (data_.alpha != 0.0) v += data_.alpha * theta.array().cos().sum();
  return v;
}

double QuadraticTask::value_g(const Vector& theta, const Vector& phi) const {
  return 0.5 * phi.dot(data_.A * phi) + phi.dot(data_.C * theta + data_.c);
}

Vector QuadraticTask::grad_f_theta(const Vector& theta, const Vector&) const {
  Vector g = data_.w * (theta - data_.s);
  if (data_.alpha != 0.0) g.array() -= data_.alpha * theta.array().sin();
  return g;
}

Vector QuadraticTask::grad_f_phi(const Vector&, const Vector& phi) const { return phi - data_.d; }

Vector QuadraticTask::grad_g_phi(const Vector& theta, const Vector& phi) const {
  return data_.A * phi + data_.C * theta + data_.c;
}

Vector QuadraticTask::hvp_g(const Vector&, const Vector&, const Vector& v) const {
  return data_.A * v;
}

Vector QuadraticTask::jvp_g(const Vector&, const Vector&, const Vector& v) const {
  return data_.C.transpose() * v;
}

std::optional<Vector> QuadraticTask::exact_phi_star(const Vector& theta) const {
  return Vector(-chol_.solve(data_.C * theta + data_.c));
}

std::optional<Vector> QuadraticTask::exact_hypergrad_term(const Vector& theta) const {
  const Vector phi_star = *exact_phi_star(theta);
  const Vector v_star = chol_.solve(phi_star - data_.d);
  return Vector(grad_f_theta(theta, phi_star) - data_.C.transpose() * v_star);
}

double QuadraticTask::exact_upper_value(const Vector& theta) const {
  return value_f(theta, *exact_phi_star(theta));
}

std::vector<QuadraticTask> make_quadratic_family(const QuadraticFamilyParams& params) {
  if (params.p < 1 || params.q < 1 || params.n_tasks < 1)
    throw ConfigError("quadratic family: dimensions must be >= 1");
  if (!(params.mu > 0.0) || params.mu > params.l_g)
    throw ConfigError("quadratic family: need 0 < mu <= l_g");

  const Rng root(params.seed);
  std::vector<QuadraticTask> tasks;
  tasks.reserve(params.n_tasks);
  for (std::size_t i = 0; i < params.n_tasks; ++i) {
    Rng rng = root.split(i);
    Vector eig(params.q);
    for (Index j = 0; j < params.q; ++j) eig[j] = rng.uniform(params.mu, params.l_g);
    eig[0] = params.mu;
    if (params.q >= 2) eig[1] = params.l_g;

    QuadraticTask::Data data;
    data.A = params.q == 1 ? Matrix::Constant(1, 1, eig[0]) : random_spd(rng, eig);
    data.C = rng.normal_matrix(params.q, params.p, params.coupling_scale);
    data.c = rng.normal_vector(params.q, params.offset_scale);
    data.d = rng.normal_vector(params.q, params.offset_scale);
    data.s = rng.normal_vector(params.p, params.offset_scale);
    data.w = params.upper_weight;
    data.alpha = params.nonconvex_alpha;
    tasks.emplace_back(std::move(data));
  }
  return tasks;
}

Vector quadratic_exact_hypergradient(const std::vector<QuadraticTask>& tasks, const Vector& theta) {
  if (tasks.empty()) throw ConfigError("quadratic_exact_hypergradient: empty batch");
  Vector sum = Vector::Zero(theta.size());
  for (const auto& t : tasks) {
    const auto& d = t.data();
    const Vector phi_star = -spd_solve_oracle(d.A, d.C * theta + d.c);
    const Vector v_star = spd_solve_oracle(d.A, phi_star - d.d);
    sum += t.grad_f_theta(theta, phi_star) - d.C.transpose() * v_star;
  }
  return sum / static_cast<double>(tasks.size());
}

}  // namespace bilevel::tasks
