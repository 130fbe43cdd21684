#pragma once

#include <Eigen/Dense>

namespace bilevel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Meta-parameters shared across tasks (length p).
using MetaParams = Vector;
/// Task-specific parameters (length q).
using TaskParams = Vector;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace bilevel
