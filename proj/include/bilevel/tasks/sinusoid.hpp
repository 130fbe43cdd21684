#pragma once

#include <cstdint>
#include <vector>

#include "bilevel/core/oracle.hpp"
#include "bilevel/core/rng.hpp"

namespace bilevel::tasks {

/// Few-shot sinusoid regression task y = a sin(x + b) with a shared tanh
/// embedding and a task-specific linear head.
///
/// Embedding: z = tanh(w1 x + b1) (hidden width h), Phi(x; theta) = W2 z + b2
/// (q features). theta packs [w1 (h), b1 (h), W2 (q x h, column-major), b2 (q)],
/// so p = 2h + qh + q. The head phi is fitted by ridge regression on the
/// training set D_g; f is the unregularized squared loss on D_f.
class SinusoidTask final : public TaskOracle {
 public:
  struct Data {
    double amplitude = 1.0;
    double phase = 0.0;
    Vector x_train, y_train;  // D_g
    Vector x_val, y_val;      // D_f
    double ridge = 0.1;
    Index hidden = 8;
    Index features = 8;
  };

  explicit SinusoidTask(Data data);

  [[nodiscard]] const Data& data() const { return data_; }

  [[nodiscard]] static Index packed_size(Index hidden, Index features) {
    return 2 * hidden + features * hidden + features;
  }

  [[nodiscard]] Index meta_dim() const override { return packed_size(data_.hidden, data_.features); }
  [[nodiscard]] Index task_dim() const override { return data_.features; }

  [[nodiscard]] double value_f(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] double value_g(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector grad_f_theta(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector grad_f_phi(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector grad_g_phi(const Vector& theta, const Vector& phi) const override;
  [[nodiscard]] Vector hvp_g(const Vector& theta, const Vector& phi,
                             const Vector& v) const override;
  [[nodiscard]] Vector jvp_g(const Vector& theta, const Vector& phi,
                             const Vector& v) const override;

  /// Ridge solution of the lower level, by dense solve.
  [[nodiscard]] std::optional<Vector> exact_phi_star(const Vector& theta) const override;

  /// Feature matrix (q x m) and hidden activations (h x m) for inputs x.
  struct Embedding {
    Matrix features;
    Matrix hidden;
  };
  [[nodiscard]] Embedding embed(const Vector& theta, const Vector& x) const;

 private:
  // Gradient w.r.t. theta of sum_j psi_j^T Phi(x_j; theta), psi_j = columns of psi.
  [[nodiscard]] Vector backprop(const Vector& theta, const Vector& x, const Embedding& emb,
                                const Matrix& psi) const;

  Data data_;
};

struct SinusoidFamilyParams {
  std::uint64_t seed = 0;
  std::size_t n_tasks = 1;
  Index hidden = 8;
  Index features = 8;
  Index samples = 10;  // m, per data set
  double ridge = 0.1;
  double x_min = -5.0, x_max = 5.0;
  double amplitude_min = 0.1, amplitude_max = 5.0;
  double phase_min = 0.0, phase_max = 3.141592653589793;
};

[[nodiscard]] std::vector<SinusoidTask> make_sinusoid_family(const SinusoidFamilyParams& params);

/// Seeded initial embedding weights (Gaussian, fan-in scaled).
[[nodiscard]] Vector sinusoid_initial_theta(Index hidden, Index features, Rng& rng);

}  // namespace bilevel::tasks
