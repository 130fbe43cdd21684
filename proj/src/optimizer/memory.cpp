#include "bilevel/optimizer/memory.hpp"

#include "bilevel/optimizer/algorithm.hpp"

namespace bilevel::optimizer {

MemoryReport memory_report(const OuterConfig& config, Index p, Index q) {
  const auto P = static_cast<std::uint64_t>(p);
  const auto Q = static_cast<std::uint64_t>(q);
  const auto B = static_cast<std::uint64_t>(config.batch_size);
  MemoryReport m;
  switch (config.estimator) {
    case EstimatorKind::implicit_cg:
      m.workspace_floats = 3 * P + 6 * Q * B;
      break;
    case EstimatorKind::itd:
      m.workspace_floats = 3 * P + 2 * Q * B;
      m.trajectory_floats = static_cast<std::uint64_t>(config.K + 1) * Q * B;
      break;
    case EstimatorKind::first_order:
    case EstimatorKind::exact:
      m.workspace_floats = 3 * P + 2 * Q * B;
      break;
  }
  return m;
}

}  // namespace bilevel::optimizer
