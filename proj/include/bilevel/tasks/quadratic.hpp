#pragma once

#include <cstdint>
#include <vector>

#include "bilevel/core/oracle.hpp"

namespace bilevel::tasks {

/// Quadratic bilevel task with a closed-form solution:
///   g(theta, phi) = 1/2 phi^T A phi + phi^T (C theta + c)
///   f(theta, phi) = 1/2 |phi - d|^2 + w/2 |theta - s|^2 + alpha sum_j cos(theta_j)
///
/// phi*(theta) = -A^{-1}(C theta + c); the phi-Hessian of g is A and the
/// mixed derivative is C^T.
class QuadraticTask final : public TaskOracle {
 public:
  struct Data {
    Matrix A;  // q x q, SPD
    Matrix C;  // q x p
    Vector c;  // q
    Vector d;  // q
    double w = 0.0;
    Vector s;  // p
    double alpha = 0.0;
  };

  explicit QuadraticTask(Data data);

  [[nodiscard]] const Data& data() const { return data_; }

  [[nodiscard]] Index meta_dim() const override { return data_.C.cols(); }
  [[nodiscard]] Index task_dim() const override { return data_.A.rows(); }

  [[nodiscard]] double value_f(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] double value_g(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector grad_f_theta(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector grad_f_phi(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector grad_g_phi(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector hvp_g(const Vector& theta, const Vector& phi,
                             const Vector& v) const override;
  [[nodiscard]] Vector jvp_g(const Vector& theta, const Vector& phi,
                             const Vector& v) const override;

  [[nodiscard]] std::optional<Vector> exact_phi_star(const Vector& theta) const override;
  [[nodiscard]] std::optional<Vector> exact_hypergrad_term(const Vector& theta) const override;

  /// Upper objective along the exact lower solution, f(theta, phi*(theta)).
  [[nodiscard]] double exact_upper_value(const Vector& theta) const;

 private:
  Data data_;
  Eigen::LLT<Matrix> chol_;  // factorization of A, used by the exact evaluators only
};

struct QuadraticFamilyParams {
  std::uint64_t seed = 0;
  Index p = 1;
  Index q = 1;
  std::size_t n_tasks = 1;
  double mu = 1.0;
  double l_g = 1.0;
  double coupling_scale = 0.5;  // std of the entries of C
  double offset_scale = 1.0;    // std of the entries of c, d, s
  double upper_weight = 1.0;    // w
  double nonconvex_alpha = 0.0;
};

/// Seeded family of quadratic tasks. Each A has spectrum uniform in
/// [mu, l_g] with mu pinned (and l_g pinned when q >= 2).
[[nodiscard]] std::vector<QuadraticTask> make_quadratic_family(const QuadraticFamilyParams& params);

/// Batch mean of the exact per-task hypergradient terms.
[[nodiscard]] Vector quadratic_exact_hypergradient(const std::vector<QuadraticTask>& tasks,
                                                   const Vector& theta);

}  // namespace bilevel::tasks
