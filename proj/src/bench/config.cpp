#include "bilevel/bench/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bilevel/core/error.hpp"
#include "bilevel/core/strict_yaml.hpp"

namespace bilevel::bench {

namespace {

optimizer::OuterConfig parse_optimizer(StrictMap m, ExperimentConfig& cfg) {
  optimizer::OuterConfig o;
  o.T = m.get("T", o.T);
  o.K = m.get("K", o.K);
  o.N = m.get("N", o.N);
  if (m.has("lambda_theta")) o.lambda_theta = m.require<double>("lambda_theta");
  if (m.has("lambda_phi")) o.lambda_phi = m.require<double>("lambda_phi");
  o.batch_size = m.get<std::size_t>("batch_size", o.batch_size);
  o.mode = optimizer::parse_mode(m.get<std::string>("mode", "deterministic"));
  o.warm_start = optimizer::parse_warm_start(m.get<std::string>("warm_start", "slot"));
  o.tol_cg = m.get("tol_cg", o.tol_cg);
  o.seed = m.get<std::uint64_t>("seed", o.seed);
  o.estimator = hypergrad::parse_estimator(m.get<std::string>("estimator", "implicit_cg"));
  if (m.has("theta0")) cfg.theta0 = m.vector("theta0");
  cfg.workers = m.get("workers", 1);
  m.finish();
  o.validate();
  if (cfg.workers < 1) throw ConfigError("optimizer.workers must be >= 1");
  return o;
}

OutputConfig parse_output(StrictMap m) {
  OutputConfig o;
  o.log_every = m.get("log_every", o.log_every);
  o.exact_every = m.get("exact_every", o.exact_every);
  o.timing = m.get("timing", o.timing);
  m.finish();
  if (o.log_every < 1) throw ConfigError("output.log_every must be >= 1");
  if (o.exact_every < 0) throw ConfigError("output.exact_every must be >= 0");
  return o;
}

template <class T>
std::vector<T> parse_axis(StrictMap& m, const std::string& key) {
  if (!m.has(key)) return {};
  auto values = m.require<std::vector<T>>(key);
  if (values.empty())
    throw ConfigError("sweep axis '" + m.qualified(key) + "' is empty (line " +
                      std::to_string(m.line_of_key(key)) + ")");
  return values;
}

SweepConfig parse_sweep(StrictMap m, bool present) {
  SweepConfig s;
  s.present = present;
  s.K = parse_axis<int>(m, "K");
  s.N = parse_axis<int>(m, "N");
  s.batch_size = parse_axis<std::size_t>(m, "batch_size");
  for (const auto& name : parse_axis<std::string>(m, "estimator"))
    s.estimator.push_back(hypergrad::parse_estimator(name));
  s.repetitions = m.get("repetitions", s.repetitions);
  s.tail = m.get("tail", s.tail);
  m.finish();
  if (s.repetitions < 1) throw ConfigError("sweep.repetitions must be >= 1");
  if (s.tail < 1) throw ConfigError("sweep.tail must be >= 1");
  return s;
}

GradcheckConfig parse_gradcheck(StrictMap m) {
  GradcheckConfig g;
  g.probes = m.get("probes", g.probes);
  g.epsilon = m.get("epsilon", g.epsilon);
  if (m.has("threshold")) g.threshold = m.require<double>("threshold");
  g.inject_grad_g_phi_bias = m.get("inject_grad_g_phi_bias", 0.0);
  m.finish();
  if (g.probes < 1) throw ConfigError("gradcheck.probes must be >= 1");
  return g;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  const YAML::Node doc = parse_yaml(text);
  if (!doc || !doc.IsMap()) throw ConfigError("config must be a mapping");
  StrictMap root(doc, "");
  ExperimentConfig cfg;
  cfg.family = tasks::parse_family_spec(root.map("family"));
  cfg.optimizer = parse_optimizer(root.map("optimizer"), cfg);
  cfg.output = parse_output(root.map("output"));
  const bool sweep_present = root.has("sweep");
  cfg.sweep = parse_sweep(root.map("sweep"), sweep_present);
  cfg.gradcheck = parse_gradcheck(root.map("gradcheck"));
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_env_overrides(ExperimentConfig& config) {
  const char* seed = std::getenv(kSeedEnv);
  if (seed == nullptr || *seed == '\0') return;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(seed, &end, 10);
  if (end == seed || *end != '\0')
    throw ConfigError(std::string(kSeedEnv) + " must be a non-negative integer");
  config.optimizer.seed = value;
}

}  // namespace bilevel::bench
