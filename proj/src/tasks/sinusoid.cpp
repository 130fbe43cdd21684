#include "bilevel/tasks/sinusoid.hpp"

#include <cmath>

#include "bilevel/core/error.hpp"
#include "bilevel/core/linalg.hpp"

namespace bilevel::tasks {

namespace {

struct Unpacked {
  Eigen::Map<const Vector> w1, b1;
  Eigen::Map<const Matrix> W2;
  Eigen::Map<const Vector> b2;
};

Unpacked unpack(const Vector& theta, Index h, Index q) {
  const double* p = theta.data();
  return {Eigen::Map<const Vector>(p, h), Eigen::Map<const Vector>(p + h, h),
          Eigen::Map<const Matrix>(p + 2 * h, q, h),
          Eigen::Map<const Vector>(p + 2 * h + q * h, q)};
}

}  // namespace

SinusoidTask::SinusoidTask(Data data) : data_(std::move(data)) {
  if (data_.hidden < 1 || data_.features < 1) throw ConfigError("sinusoid task: empty network");
  if (data_.x_train.size() != data_.y_train.size() || data_.x_val.size() != data_.y_val.size() ||
      data_.x_train.size() == 0 || data_.x_val.size() == 0)
    throw ConfigError("sinusoid task: sample sets must be non-empty and paired");
  if (!(data_.ridge > 0.0)) throw ConfigError("sinusoid task: ridge weight must be positive");
}

SinusoidTask::Embedding SinusoidTask::embed(const Vector& theta, const Vector& x) const {
  const auto net = unpack(theta, data_.hidden, data_.features);
  Embedding e;
  e.hidden = ((net.w1 * x.transpose()).colwise() + net.b1).array().tanh().matrix();
  e.features = (net.W2 * e.hidden).colwise() + net.b2;
  return e;
}

Vector SinusoidTask::backprop(const Vector& theta, const Vector& x, const Embedding& emb,
                              const Matrix& psi) const {
  const Index h = data_.hidden, q = data_.features;
  const auto net = unpack(theta, h, q);
  Vector out(meta_dim());
  const Matrix delta =
      ((net.W2.transpose() * psi).array() * (1.0 - emb.hidden.array().square())).matrix();
  out.segment(0, h) = delta * x;
  out.segment(h, h) = delta.rowwise().sum();
  Eigen::Map<Matrix>(out.data() + 2 * h, q, h) = psi * emb.hidden.transpose();
  out.segment(2 * h + q * h, q) = psi.rowwise().sum();
  return out;
}

double SinusoidTask::value_f(const Vector& theta, const Vector& phi) const {
  const auto emb = embed(theta, data_.x_val);
  const Vector e = emb.features.transpose() * phi - data_.y_val;
  return 0.5 * e.squaredNorm() / static_cast<double>(e.size());
}

double SinusoidTask::value_g(const Vector& theta, const Vector& phi) const {
  const auto emb = embed(theta, data_.x_train);
  const Vector e = emb.features.transpose() * phi - data_.y_train;
  return 0.5 * e.squaredNorm() / static_cast<double>(e.size()) +
         0.5 * data_.ridge * phi.squaredNorm();
}

Vector SinusoidTask::grad_f_theta(const Vector& theta, const Vector& phi) const {
  const auto emb = embed(theta, data_.x_val);
  const Vector e = emb.features.transpose() * phi - data_.y_val;
  const Matrix psi = phi * e.transpose();
  return backprop(theta, data_.x_val, emb, psi) / static_cast<double>(e.size());
}

Vector SinusoidTask::grad_f_phi(const Vector& theta, const Vector& phi) const {
  const auto emb = embed(theta, data_.x_val);
  const Vector e = emb.features.transpose() * phi - data_.y_val;
  return emb.features * e / static_cast<double>(e.size());
}

Vector SinusoidTask::grad_g_phi(const Vector& theta, const Vector& phi) const {
  const auto emb = embed(theta, data_.x_train);
  const Vector e = emb.features.transpose() * phi - data_.y_train;
  return emb.features * e / static_cast<double>(e.size()) + data_.ridge * phi;
}

Vector SinusoidTask::hvp_g(const Vector& theta, const Vector&, const Vector& v) const {
  const auto emb = embed(theta, data_.x_train);
  const Vector proj = emb.features.transpose() * v;
  return emb.features * proj / static_cast<double>(proj.size()) + data_.ridge * v;
}

Vector SinusoidTask::jvp_g(const Vector& theta, const Vector& phi, const Vector& v) const {
  // d/dtheta [v^T grad_phi g] = (1/m) sum_j J_j((v^T Phi_j) phi + e_j v)
  const auto emb = embed(theta, data_.x_train);
  const Vector e = emb.features.transpose() * phi - data_.y_train;
  const Vector proj = emb.features.transpose() * v;
  const Matrix psi = phi * proj.transpose() + v * e.transpose();
  return backprop(theta, data_.x_train, emb, psi) / static_cast<double>(e.size());
}

std::optional<Vector> SinusoidTask::exact_phi_star(const Vector& theta) const {
  const auto emb = embed(theta, data_.x_train);
  const double m = static_cast<double>(data_.x_train.size());
  Matrix H = emb.features * emb.features.transpose() / m;
  H.diagonal().array() += data_.ridge;
  H = 0.5 * (H + H.transpose());
  return spd_solve_oracle(H, emb.features * data_.y_train / m);
}

std::vector<SinusoidTask> make_sinusoid_family(const SinusoidFamilyParams& params) {
  if (params.n_tasks < 1 || params.samples < 1)
    throw ConfigError("sinusoid family: n_tasks and samples must be >= 1");
  const Rng root(params.seed);
  std::vector<SinusoidTask> tasks;
  tasks.reserve(params.n_tasks);
  for (std::size_t i = 0; i < params.n_tasks; ++i) {
    Rng rng = root.split(i);
    SinusoidTask::Data d;
    d.amplitude = rng.uniform(params.amplitude_min, params.amplitude_max);
    d.phase = rng.uniform(params.phase_min, params.phase_max);
    auto draw = [&](Vector& x, Vector& y) {
      x.resize(params.samples);
      y.resize(params.samples);
      for (Index j = 0; j < params.samples; ++j) {
        x[j] = rng.uniform(params.x_min, params.x_max);
        y[j] = d.amplitude * std::sin(x[j] + d.phase);
      }
    };
    draw(d.x_train, d.y_train);
    draw(d.x_val, d.y_val);
    d.ridge = params.ridge;
    d.hidden = params.hidden;
    d.features = params.features;
    tasks.emplace_back(std::move(d));
  }
  return tasks;
}

Vector sinusoid_initial_theta(Index hidden, Index features, Rng& rng) {
  Vector theta(SinusoidTask::packed_size(hidden, features));
  const Index h = hidden, q = features;
  theta.segment(0, h) = rng.normal_vector(h, 1.0);
  theta.segment(h, h) = rng.normal_vector(h, 1.0);
  theta.segment(2 * h, q * h) = rng.normal_vector(q * h, 1.0 / std::sqrt(static_cast<double>(h)));
  theta.segment(2 * h + q * h, q).setZero();
  return theta;
}

}  // namespace bilevel::tasks
