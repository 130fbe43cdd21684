#include "bilevel/tasks/family.hpp"

#include <cmath>

#include "bilevel/core/error.hpp"
#include "bilevel/core/rng.hpp"

namespace bilevel::tasks {

namespace {

constexpr std::uint64_t kThetaStream = 0x7468657461ULL;  // "theta"

NoiseLevels parse_noise(StrictMap m) {
  NoiseLevels n;
  n.sigma_f1 = m.get("sigma_f1", 0.0);
  n.sigma_g1 = m.get("sigma_g1", 0.0);
  n.sigma_g2 = m.get("sigma_g2", 0.0);
  m.finish();
  if (n.sigma_f1 < 0 || n.sigma_g1 < 0 || n.sigma_g2 < 0)
    throw ConfigError("noise levels must be non-negative");
  return n;
}

std::pair<double, double> parse_range(StrictMap& m, const std::string& key,
                                      std::pair<double, double> fallback) {
  if (!m.has(key)) return fallback;
  const auto v = m.require<std::vector<double>>(key);
  if (v.size() != 2 || !(v[0] <= v[1]))
    throw ConfigError("key '" + m.qualified(key) + "' must be [lo, hi] with lo <= hi (line " +
                      std::to_string(m.line_of_key(key)) + ")");
  return {v[0], v[1]};
}

QuadraticTask::Data parse_explicit_task(StrictMap m) {
  QuadraticTask::Data d;
  d.A = m.matrix("A");
  d.C = m.matrix("C");
  d.c = m.vector("c");
  d.d = m.vector("d");
  d.w = m.get("w", 0.0);
  d.s = m.has("s") ? m.vector("s") : Vector(Vector::Zero(d.C.cols()));
  d.alpha = m.get("alpha", 0.0);
  m.finish();
  return d;
}

void emit_vector(YAML::Emitter& out, const Vector& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index i = 0; i < v.size(); ++i) out << v[i];
  out << YAML::EndSeq;
}

void emit_matrix(YAML::Emitter& out, const Matrix& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index i = 0; i < m.rows(); ++i) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Index j = 0; j < m.cols(); ++j) out << m(i, j);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

}  // namespace

std::string FamilySpec::kind() const {
  switch (params.index()) {
    case 0: return "quadratic";
    case 1: return "sinusoid";
    default: return "quadratic_explicit";
  }
}

FamilySpec parse_family_spec(StrictMap m) {
  FamilySpec spec;
  const auto kind = m.get<std::string>("kind", "quadratic");
  if (kind == "quadratic") {
    QuadraticFamilyParams p;
    p.seed = m.get<std::uint64_t>("seed", 0);
    p.p = m.get<Index>("p", 1);
    p.q = m.get<Index>("q", 1);
    p.n_tasks = m.get<std::size_t>("n_tasks", 1);
    p.mu = m.get("mu", 1.0);
    p.l_g = m.get("l_g", 1.0);
    p.coupling_scale = m.get("coupling_scale", p.coupling_scale);
    p.offset_scale = m.get("offset_scale", p.offset_scale);
    p.upper_weight = m.get("upper_weight", p.upper_weight);
    p.nonconvex_alpha = m.get("nonconvex_alpha", 0.0);
    if (p.p < 1 || p.q < 1 || p.n_tasks < 1)
      throw ConfigError("family: p, q and n_tasks must be >= 1");
    if (!(p.mu > 0.0) || p.mu > p.l_g) throw ConfigError("family: need 0 < mu <= l_g");
    spec.params = p;
  } else if (kind == "sinusoid") {
    SinusoidFamilyParams p;
    p.seed = m.get<std::uint64_t>("seed", 0);
    p.n_tasks = m.get<std::size_t>("n_tasks", 1);
    p.hidden = m.get<Index>("hidden", p.hidden);
    p.features = m.get<Index>("q", p.features);
    p.samples = m.get<Index>("samples", p.samples);
    p.ridge = m.get("ridge", p.ridge);
    std::tie(p.x_min, p.x_max) = parse_range(m, "x_range", {p.x_min, p.x_max});
    std::tie(p.amplitude_min, p.amplitude_max) =
        parse_range(m, "amplitude_range", {p.amplitude_min, p.amplitude_max});
    std::tie(p.phase_min, p.phase_max) = parse_range(m, "phase_range", {p.phase_min, p.phase_max});
    if (p.hidden < 1 || p.features < 1 || p.samples < 1 || p.n_tasks < 1)
      throw ConfigError("family: hidden, q, samples and n_tasks must be >= 1");
    if (!(p.ridge > 0.0)) throw ConfigError("family: ridge must be positive");
    spec.params = p;
  } else if (kind == "quadratic_explicit") {
    ExplicitQuadraticParams p;
    const YAML::Node list = m.raw("tasks");
    if (!list || !list.IsSequence() || list.size() == 0)
      throw ConfigError("family: quadratic_explicit needs a non-empty 'tasks' list");
    for (std::size_t i = 0; i < list.size(); ++i)
      p.tasks.push_back(parse_explicit_task(StrictMap(list[i], m.qualified("tasks[" + std::to_string(i) + "]"))));
    spec.params = std::move(p);
  } else {
    throw ConfigError("family: unknown kind '" + kind + "' (line " +
                      std::to_string(m.line_of_key("kind")) + ")");
  }
  spec.noise = parse_noise(m.map("noise"));
  m.finish();
  return spec;
}

void emit_family_spec(YAML::Emitter& out, const FamilySpec& spec) {
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << spec.kind();
  if (const auto* p = std::get_if<QuadraticFamilyParams>(&spec.params)) {
    out << YAML::Key << "seed" << YAML::Value << p->seed;
    out << YAML::Key << "p" << YAML::Value << p->p;
    out << YAML::Key << "q" << YAML::Value << p->q;
    out << YAML::Key << "n_tasks" << YAML::Value << p->n_tasks;
    out << YAML::Key << "mu" << YAML::Value << p->mu;
    out << YAML::Key << "l_g" << YAML::Value << p->l_g;
    out << YAML::Key << "coupling_scale" << YAML::Value << p->coupling_scale;
    out << YAML::Key << "offset_scale" << YAML::Value << p->offset_scale;
    out << YAML::Key << "upper_weight" << YAML::Value << p->upper_weight;
    out << YAML::Key << "nonconvex_alpha" << YAML::Value << p->nonconvex_alpha;
  } else if (const auto* s = std::get_if<SinusoidFamilyParams>(&spec.params)) {
    out << YAML::Key << "seed" << YAML::Value << s->seed;
    out << YAML::Key << "n_tasks" << YAML::Value << s->n_tasks;
    out << YAML::Key << "hidden" << YAML::Value << s->hidden;
    out << YAML::Key << "q" << YAML::Value << s->features;
    out << YAML::Key << "samples" << YAML::Value << s->samples;
    out << YAML::Key << "ridge" << YAML::Value << s->ridge;
    out << YAML::Key << "x_range" << YAML::Value << YAML::Flow << YAML::BeginSeq << s->x_min << s->x_max << YAML::EndSeq;
    out << YAML::Key << "amplitude_range" << YAML::Value << YAML::Flow << YAML::BeginSeq << s->amplitude_min << s->amplitude_max << YAML::EndSeq;
    out << YAML::Key << "phase_range" << YAML::Value << YAML::Flow << YAML::BeginSeq << s->phase_min << s->phase_max << YAML::EndSeq;
  } else {
    const auto& e = std::get<ExplicitQuadraticParams>(spec.params);
    out << YAML::Key << "tasks" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : e.tasks) {
      out << YAML::BeginMap;
      out << YAML::Key << "A" << YAML::Value; emit_matrix(out, t.A);
      out << YAML::Key << "C" << YAML::Value; emit_matrix(out, t.C);
      out << YAML::Key << "c" << YAML::Value; emit_vector(out, t.c);
      out << YAML::Key << "d" << YAML::Value; emit_vector(out, t.d);
      out << YAML::Key << "w" << YAML::Value << t.w;
      out << YAML::Key << "s" << YAML::Value; emit_vector(out, t.s);
      out << YAML::Key << "alpha" << YAML::Value << t.alpha;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "sigma_f1" << YAML::Value << spec.noise.sigma_f1;
  out << YAML::Key << "sigma_g1" << YAML::Value << spec.noise.sigma_g1;
  out << YAML::Key << "sigma_g2" << YAML::Value << spec.noise.sigma_g2;
  out << YAML::EndMap;
  out << YAML::EndMap;
}

std::string emit_family_spec(const FamilySpec& spec) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  emit_family_spec(out, spec);
  return out.c_str();
}

ProblemConstants quadratic_constants(const std::vector<QuadraticTask>& tasks,
                                     const NoiseLevels& noise) {
  ProblemConstants c;
  c.mu = INFINITY;
  c.l_g = 0.0;
  c.l_f = 1.0;
  for (const auto& t : tasks) {
    const auto& d = t.data();
    Eigen::SelfAdjointEigenSolver<Matrix> eig_a(d.A, Eigen::EigenvaluesOnly);
    c.mu = std::min(c.mu, eig_a.eigenvalues().minCoeff());
    const Index p = d.C.cols(), q = d.A.rows();
    Matrix joint = Matrix::Zero(p + q, p + q);
    joint.bottomRightCorner(q, q) = d.A;
    joint.bottomLeftCorner(q, p) = d.C;
    joint.topRightCorner(p, q) = d.C.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig_j(joint, Eigen::EigenvaluesOnly);
    c.l_g = std::max(c.l_g, eig_j.eigenvalues().cwiseAbs().maxCoeff());
    c.l_f = std::max(c.l_f, d.w + std::abs(d.alpha));
  }
  // f is not globally Lipschitz for quadratic tasks; l_f0 only enters L_F
  // multiplied by l_g1 or l_g2, which vanish here.
  c.l_f0 = 1.0;
  c.l_g1 = 0.0;
  c.l_g2 = 0.0;
  c.sigma_f1_sq = noise.sigma_f1 * noise.sigma_f1;
  c.sigma_g1_sq = noise.sigma_g1 * noise.sigma_g1;
  c.sigma_g2_sq = noise.sigma_g2 * noise.sigma_g2;
  return c;
}

Family::Family(FamilySpec spec) : spec_(std::move(spec)) {
  if (const auto* p = std::get_if<QuadraticFamilyParams>(&spec_.params)) {
    quadratic_ = make_quadratic_family(*p);
  } else if (const auto* e = std::get_if<ExplicitQuadraticParams>(&spec_.params)) {
    for (const auto& d : e->tasks) quadratic_.emplace_back(d);
    if (quadratic_.empty()) throw ConfigError("family: no tasks");
    for (const auto& t : quadratic_)
      if (t.meta_dim() != quadratic_.front().meta_dim() || t.task_dim() != quadratic_.front().task_dim())
        throw ConfigError("family: explicit tasks must share dimensions");
  } else {
    const auto& s = std::get<SinusoidFamilyParams>(spec_.params);
    sinusoid_ = make_sinusoid_family(s);
  }

  if (!quadratic_.empty()) {
    for (const auto& t : quadratic_) oracles_.push_back(&t);
    constants_ = quadratic_constants(quadratic_, spec_.noise);
    theta0_ = Vector::Zero(quadratic_.front().meta_dim());
  } else {
    for (const auto& t : sinusoid_) oracles_.push_back(&t);
    const auto& s = std::get<SinusoidFamilyParams>(spec_.params);
    Rng rng = Rng(s.seed).split(kThetaStream);
    theta0_ = sinusoid_initial_theta(s.hidden, s.features, rng);
    // Local estimates at theta0: trace bounds on the data Gram matrices.
    constants_.mu = s.ridge;
    constants_.l_g = s.ridge;
    constants_.l_f = s.ridge;
    for (const auto& t : sinusoid_) {
      const auto& d = t.data();
      const auto train = t.embed(theta0_, d.x_train);
      const auto val = t.embed(theta0_, d.x_val);
      constants_.l_g = std::max(constants_.l_g, train.features.squaredNorm() / static_cast<double>(d.x_train.size()) + s.ridge);
      constants_.l_f = std::max(constants_.l_f, val.features.squaredNorm() / static_cast<double>(d.x_val.size()));
    }
    constants_.l_f0 = 1.0;
    constants_.l_g1 = constants_.l_g;
    constants_.l_g2 = constants_.l_g;
    constants_.sigma_f1_sq = spec_.noise.sigma_f1 * spec_.noise.sigma_f1;
    constants_.sigma_g1_sq = spec_.noise.sigma_g1 * spec_.noise.sigma_g1;
    constants_.sigma_g2_sq = spec_.noise.sigma_g2 * spec_.noise.sigma_g2;
  }
  p_ = oracles_.front()->meta_dim();
  q_ = oracles_.front()->task_dim();
}

Vector Family::exact_hypergradient(const Vector& theta, std::span<const std::size_t> indices) const {
  if (!has_exact_hypergradient()) throw NumericalError("exact hypergradient unavailable");
  Vector sum = Vector::Zero(p_);
  if (indices.empty()) {
    for (const auto& t : quadratic_) sum += *t.exact_hypergrad_term(theta);
    return sum / static_cast<double>(quadratic_.size());
  }
  for (auto i : indices) sum += *quadratic_.at(i).exact_hypergrad_term(theta);
  return sum / static_cast<double>(indices.size());
}

}  // namespace bilevel::tasks
