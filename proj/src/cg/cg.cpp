#include "bilevel/cg/cg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bilevel/core/error.hpp"

namespace bilevel::cg {

namespace {

constexpr double kBreakdown = 1e-300;

void require_finite(double x, const char* step) {
  if (!std::isfinite(x)) throw NumericalError(std::string("cg_solve: non-finite ") + step);
}

void require_finite(const Vector& x, const char* step) {
  if (!x.allFinite()) throw NumericalError(std::string("cg_solve: non-finite ") + step);
}

}  // namespace

CgResult cg_solve(const Operator& apply_H, const Vector& b, const Vector& v0, int N,
                  const CgOptions& options) {
  if (N < 0) throw ConfigError("cg_solve: N must be non-negative");
  if (options.tol < 0) throw ConfigError("cg_solve: tol must be non-negative");
  if (b.size() != v0.size()) throw ConfigError("cg_solve: dimension mismatch");

  const double threshold = options.tol * std::max(b.norm(), options.floor);

  CgState s;
  s.v = v0;
  const Vector hv0 = apply_H(s.v);
  require_finite(hv0, "initial Hessian-vector product");
  s.r = b - hv0;
  s.p = s.r;
  double rr = s.r.squaredNorm();
  s.residual_norm = std::sqrt(rr);
  require_finite(s.residual_norm, "initial residual");
  if (options.observer) options.observer(s);

  auto converged = [&] { return s.residual_norm <= threshold; };

  CgResult out;
  while (s.iter < N) {
    if (converged() || rr <= kBreakdown) {
      if (!converged())
        throw NumericalError("cg_solve: residual breakdown above tolerance");
      out.early_exit = true;
      break;
    }
    const Vector h = apply_H(s.p);
    require_finite(h, "Hessian-vector product");
    const double pHp = s.p.dot(h);
    require_finite(pHp, "curvature p'Hp");
    if (pHp <= kBreakdown)
      throw NumericalError("cg_solve: operator not positive definite along search direction");

    const double eta = rr / pHp;
    s.v += eta * s.p;
    s.r -= eta * h;
    const double rr_next = s.r.squaredNorm();
    require_finite(rr_next, "residual");
    const double zeta = rr_next / rr;
    s.p = s.r + zeta * s.p;
    rr = rr_next;
    s.residual_norm = std::sqrt(rr);
    ++s.iter;
    if (options.observer) options.observer(s);
  }

  out.v = std::move(s.v);
  out.iters_used = s.iter;
  out.final_residual = s.residual_norm;
  return out;
}

}  // namespace bilevel::cg
