#pragma once

#include <cstdint>

#include "bilevel/core/types.hpp"

namespace bilevel::optimizer {

struct OuterConfig;

/// Resident-scalar counting model of one outer iteration.
///
/// workspace_floats counts live parameter-sized vectors other than stored
/// history; trajectory_floats counts scalars kept only because the estimator
/// revisits past lower-level iterates.
///
///   shared (all estimators): theta, u, gradient buffer          3p
///   implicit_cg, per task:   phi, v, r, p, h, gradient scratch  6q
///   itd, per task:           adjoint, product scratch           2q
///                            + trajectory phi^0..phi^K          (K+1)q
///   first_order / exact:     phi, gradient scratch              2q
struct MemoryReport {
  std::uint64_t workspace_floats = 0;
  std::uint64_t trajectory_floats = 0;

  [[nodiscard]] std::uint64_t total() const noexcept { return workspace_floats + trajectory_floats; }
  friend bool operator==(const MemoryReport&, const MemoryReport&) = default;
};

[[nodiscard]] MemoryReport memory_report(const OuterConfig& config, Index p, Index q);

}  // namespace bilevel::optimizer
