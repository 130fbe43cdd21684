#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "bilevel/core/types.hpp"

namespace bilevel {

/// SplitMix64 finalizer; used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded generator that can be split into child streams keyed by integers.
///
/// A child stream depends only on the parent key and the split labels, never
/// on how many numbers the parent has drawn. Work distributed across workers
/// therefore draws identical numbers regardless of scheduling, as long as
/// each unit of work splits its own stream by a stable label (iteration,
/// task slot, ...).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed)), engine_(key_) {}

  [[nodiscard]] Rng split(std::uint64_t label) const {
    return Rng(key_, label);
  }
  [[nodiscard]] Rng split(std::initializer_list<std::uint64_t> labels) const {
    Rng r = *this;
    for (auto l : labels) r = r.split(l);
    return r;
  }

  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

  std::mt19937_64& engine() noexcept { return engine_; }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  Vector normal_vector(Index n, double scale = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = scale * normal();
    return v;
  }
  Matrix normal_matrix(Index rows, Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    // column-major fill order is part of the reproducibility contract
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = scale * normal();
    return m;
  }

 private:
  Rng(std::uint64_t parent, std::uint64_t label)
      : key_(mix64(parent ^ mix64(label + 0x632be59bd9b4e019ULL))),
        engine_(key_) {}

  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace bilevel
