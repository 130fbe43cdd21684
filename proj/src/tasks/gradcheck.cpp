#include "bilevel/tasks/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bilevel/core/error.hpp"

namespace bilevel::tasks {

double GradcheckReport::worst() const {
  const auto v = values();
  return *std::max_element(v.begin(), v.end());
}

std::string_view GradcheckReport::worst_method() const {
  const auto v = values();
  return kMethods[static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())];
}

void GradcheckReport::absorb(const GradcheckReport& o) {
  grad_f_theta = std::max(grad_f_theta, o.grad_f_theta);
  grad_f_phi = std::max(grad_f_phi, o.grad_f_phi);
  grad_g_phi = std::max(grad_g_phi, o.grad_g_phi);
  hvp_g = std::max(hvp_g, o.hvp_g);
  jvp_g = std::max(jvp_g, o.jvp_g);
}

double relative_error(const Vector& actual, const Vector& reference) {
  if (actual.size() != reference.size()) return INFINITY;
  if (actual.size() == 0) return 0.0;
  const double scale = std::max({actual.lpNorm<Eigen::Infinity>(),
                                 reference.lpNorm<Eigen::Infinity>(), 1.0});
  return (actual - reference).lpNorm<Eigen::Infinity>() / scale;
}

namespace {

Vector checked(Vector v, const char* method) {
  if (!v.allFinite()) throw NumericalError(std::string("gradcheck: non-finite output from ") + method);
  return v;
}

template <class Scalar>
Vector central_gradient(const Vector& x, double eps, Scalar&& fn) {
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = fn(probe);
    probe[i] = x[i] - eps;
    const double down = fn(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

}  // namespace

GradcheckReport gradcheck(const TaskOracle& oracle, const Vector& theta, const Vector& phi,
                          const Vector& direction, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ConfigError("gradcheck: eps must lie in [1e-7, 1e-3]");
  GradcheckReport r;

  const Vector gft = checked(oracle.grad_f_theta(theta, phi), "grad_f_theta");
  const Vector gfp = checked(oracle.grad_f_phi(theta, phi), "grad_f_phi");
  const Vector ggp = checked(oracle.grad_g_phi(theta, phi), "grad_g_phi");
  const Vector hv = checked(oracle.hvp_g(theta, phi, direction), "hvp_g");
  const Vector jv = checked(oracle.jvp_g(theta, phi, direction), "jvp_g");

  r.grad_f_theta = relative_error(
      gft, central_gradient(theta, eps, [&](const Vector& t) { return oracle.value_f(t, phi); }));
  r.grad_f_phi = relative_error(
      gfp, central_gradient(phi, eps, [&](const Vector& p) { return oracle.value_f(theta, p); }));
  r.grad_g_phi = relative_error(
      ggp, central_gradient(phi, eps, [&](const Vector& p) { return oracle.value_g(theta, p); }));

  const Vector hv_fd = (checked(oracle.grad_g_phi(theta, phi + eps * direction), "grad_g_phi") -
                        checked(oracle.grad_g_phi(theta, phi - eps * direction), "grad_g_phi")) /
                       (2 * eps);
  r.hvp_g = relative_error(hv, hv_fd);

  const Vector jv_fd = central_gradient(theta, eps, [&](const Vector& t) {
    return direction.dot(oracle.grad_g_phi(t, phi));
  });
  r.jvp_g = relative_error(jv, jv_fd);
  return r;
}

}  // namespace bilevel::tasks
