#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "bilevel/core/constants.hpp"
#include "bilevel/core/oracle.hpp"
#include "bilevel/core/strict_yaml.hpp"
#include "bilevel/tasks/noisy.hpp"
#include "bilevel/tasks/quadratic.hpp"
#include "bilevel/tasks/sinusoid.hpp"

namespace bilevel::tasks {

/// Explicitly listed quadratic tasks (no random generation).
struct ExplicitQuadraticParams {
  std::vector<QuadraticTask::Data> tasks;
};

/// Everything needed to regenerate a task family bit-for-bit.
struct FamilySpec {
  std::variant<QuadraticFamilyParams, SinusoidFamilyParams, ExplicitQuadraticParams> params;
  NoiseLevels noise;

  [[nodiscard]] std::string kind() const;
};

/// Parses a family section (strict: unknown keys rejected).
[[nodiscard]] FamilySpec parse_family_spec(StrictMap section);
/// Serializes a spec so that parse_family_spec(emit_family_spec(s)) == s.
[[nodiscard]] std::string emit_family_spec(const FamilySpec& spec);
void emit_family_spec(YAML::Emitter& out, const FamilySpec& spec);

/// A pool of tasks plus the problem constants and initial points of a run.
class Family {
 public:
  explicit Family(FamilySpec spec);
  Family(const Family&) = delete;
  Family& operator=(const Family&) = delete;
  Family(Family&&) = default;
  Family& operator=(Family&&) = default;

  [[nodiscard]] const FamilySpec& spec() const { return spec_; }
  [[nodiscard]] std::size_t size() const { return oracles_.size(); }
  [[nodiscard]] const TaskOracle& task(std::size_t i) const { return *oracles_.at(i); }
  [[nodiscard]] std::span<const TaskOracle* const> tasks() const { return oracles_; }
  [[nodiscard]] const std::vector<QuadraticTask>& quadratic_tasks() const { return quadratic_; }

  [[nodiscard]] Index meta_dim() const { return p_; }
  [[nodiscard]] Index task_dim() const { return q_; }
  [[nodiscard]] const ProblemConstants& constants() const { return constants_; }
  [[nodiscard]] const NoiseLevels& noise() const { return spec_.noise; }

  [[nodiscard]] const Vector& initial_theta() const { return theta0_; }
  [[nodiscard]] Vector initial_phi() const { return Vector::Zero(q_); }

  [[nodiscard]] bool has_exact_hypergradient() const { return !quadratic_.empty(); }
  /// Mean exact hypergradient over the given pool indices (all when empty).
  [[nodiscard]] Vector exact_hypergradient(const Vector& theta,
                                           std::span<const std::size_t> indices = {}) const;

 private:
  FamilySpec spec_;
  std::vector<QuadraticTask> quadratic_;
  std::vector<SinusoidTask> sinusoid_;
  std::vector<const TaskOracle*> oracles_;
  Index p_ = 0, q_ = 0;
  ProblemConstants constants_;
  Vector theta0_;
};

/// Constants of a quadratic pool: mu = smallest eigenvalue of any A; l_g =
/// largest spectral norm of the joint Hessian [[0, C^T], [C, A]]; l_f =
/// max(1, w + |alpha|); l_g1 = l_g2 = 0 (constant second derivatives).
[[nodiscard]] ProblemConstants quadratic_constants(const std::vector<QuadraticTask>& tasks,
                                                   const NoiseLevels& noise);

}  // namespace bilevel::tasks
