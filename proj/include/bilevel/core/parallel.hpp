#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace bilevel {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Indices are dealt in
/// contiguous blocks; callers write results into per-index slots and reduce
/// afterwards in index order, so results never depend on scheduling. The
/// first exception (lowest index) is rethrown.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nthreads = std::min(w, n);
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> threads;
    threads.reserve(nthreads);
    for (std::size_t k = 0; k < nthreads; ++k) {
      threads.emplace_back([&, k] {
        const std::size_t lo = n * k / nthreads;
        const std::size_t hi = n * (k + 1) / nthreads;
        for (std::size_t i = lo; i < hi; ++i) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace bilevel
