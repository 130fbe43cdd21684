#include "bilevel/bench/run_log.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include <json.hpp>

#include "bilevel/core/error.hpp"

namespace bilevel::bench {

using nlohmann::ordered_json;

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json counters_json(const EvalCounters& c) {
  ordered_json j;
  j["n_grad_f_theta"] = c.n_grad_f_theta;
  j["n_grad_f_phi"] = c.n_grad_f_phi;
  j["n_grad_g_phi"] = c.n_grad_g_phi;
  j["n_hvp"] = c.n_hvp;
  j["n_jvp"] = c.n_jvp;
  return j;
}

ordered_json memory_json(const optimizer::MemoryReport& m) {
  ordered_json j;
  j["workspace_floats"] = m.workspace_floats;
  j["trajectory_floats"] = m.trajectory_floats;
  return j;
}

template <class T>
T field(const ordered_json& j, const char* key, std::size_t line) {
  if (!j.contains(key))
    throw ConfigError("run log line " + std::to_string(line) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("run log line " + std::to_string(line) + ": bad field '" + key + "'");
  }
}

std::optional<double> optional_field(const ordered_json& j, const char* key, std::size_t line) {
  if (!j.contains(key))
    throw ConfigError("run log line " + std::to_string(line) + ": missing field '" + key + "'");
  if (j.at(key).is_null()) return std::nullopt;
  return field<double>(j, key, line);
}

EvalCounters parse_counters(const ordered_json& j, std::size_t line) {
  const auto& c = j.at("counters");
  EvalCounters out;
  out.n_grad_f_theta = field<std::uint64_t>(c, "n_grad_f_theta", line);
  out.n_grad_f_phi = field<std::uint64_t>(c, "n_grad_f_phi", line);
  out.n_grad_g_phi = field<std::uint64_t>(c, "n_grad_g_phi", line);
  out.n_hvp = field<std::uint64_t>(c, "n_hvp", line);
  out.n_jvp = field<std::uint64_t>(c, "n_jvp", line);
  return out;
}

optimizer::MemoryReport parse_memory(const ordered_json& j, std::size_t line) {
  const auto& m = j.at("memory");
  return {field<std::uint64_t>(m, "workspace_floats", line),
          field<std::uint64_t>(m, "trajectory_floats", line)};
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string format_iteration(const optimizer::RunRecord& r, bool timing) {
  ordered_json j;
  j["schema_version"] = kLogSchemaVersion;
  j["type"] = "iteration";
  j["t"] = r.t;
  j["grad_est_norm"] = r.grad_est_norm;
  j["grad_exact_norm"] = optional_number(r.grad_exact_norm);
  j["estimator_error"] = optional_number(r.estimator_error);
  j["phi_gap"] = optional_number(r.phi_gap);
  j["counters"] = counters_json(r.counters);
  j["memory"] = memory_json(r.memory);
  if (timing) j["wall_ns"] = r.wall_ns;
  return j.dump();
}

std::string format_summary(const RunSummary& s) {
  ordered_json j;
  j["schema_version"] = kLogSchemaVersion;
  j["type"] = "summary";
  j["T"] = s.T;
  j["estimator"] = s.estimator;
  j["K"] = s.K;
  j["N"] = s.N;
  j["batch_size"] = s.batch_size;
  j["lambda_theta"] = s.lambda_theta;
  j["lambda_phi"] = s.lambda_phi;
  j["theta"] = s.theta;
  j["grad_exact_norm"] = optional_number(s.grad_exact_norm);
  j["running_mean_grad_sq"] = optional_number(s.running_mean_grad_sq);
  j["counters"] = counters_json(s.counters);
  j["memory"] = memory_json(s.memory);
  return j.dump();
}

RunSummary summarize(const optimizer::RunResult& result, const optimizer::OuterConfig& config) {
  RunSummary s;
  s.T = config.T;
  s.estimator = std::string(hypergrad::to_string(config.estimator));
  s.K = config.K;
  s.N = config.N;
  s.batch_size = config.batch_size;
  s.lambda_theta = result.lambda_theta;
  s.lambda_phi = result.lambda_phi;
  s.theta.assign(result.theta.data(), result.theta.data() + result.theta.size());
  s.grad_exact_norm = result.final_grad_exact_norm;
  double sum = 0.0;
  int n = 0;
  for (const auto& r : result.records) {
    if (!r.grad_exact_norm) continue;
    sum += *r.grad_exact_norm * *r.grad_exact_norm;
    ++n;
  }
  if (n > 0) s.running_mean_grad_sq = sum / n;
  s.counters = result.counters;
  if (!result.records.empty()) s.memory = result.records.back().memory;
  return s;
}

ParsedLog parse_run_log(std::istream& in) {
  ParsedLog log;
  bool have_summary = false;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    if (have_summary)
      throw ConfigError("run log line " + std::to_string(line) + ": content after summary");
    ordered_json j;
    try {
      j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("run log line " + std::to_string(line) + ": not a JSON object");
    }
    if (field<int>(j, "schema_version", line) != kLogSchemaVersion)
      throw ConfigError("run log line " + std::to_string(line) + ": unsupported schema_version");
    const auto type = field<std::string>(j, "type", line);
    if (type == "iteration") {
      optimizer::RunRecord r;
      r.t = field<int>(j, "t", line);
      r.grad_est_norm = field<double>(j, "grad_est_norm", line);
      r.grad_exact_norm = optional_field(j, "grad_exact_norm", line);
      r.estimator_error = optional_field(j, "estimator_error", line);
      r.phi_gap = optional_field(j, "phi_gap", line);
      r.counters = parse_counters(j, line);
      r.memory = parse_memory(j, line);
      if (j.contains("wall_ns")) r.wall_ns = field<std::int64_t>(j, "wall_ns", line);
      log.iterations.push_back(std::move(r));
    } else if (type == "summary") {
      auto& s = log.summary;
      s.T = field<int>(j, "T", line);
      s.estimator = field<std::string>(j, "estimator", line);
      s.K = field<int>(j, "K", line);
      s.N = field<int>(j, "N", line);
      s.batch_size = field<std::size_t>(j, "batch_size", line);
      s.lambda_theta = field<double>(j, "lambda_theta", line);
      s.lambda_phi = field<double>(j, "lambda_phi", line);
      s.theta = field<std::vector<double>>(j, "theta", line);
      s.grad_exact_norm = optional_field(j, "grad_exact_norm", line);
      s.running_mean_grad_sq = optional_field(j, "running_mean_grad_sq", line);
      s.counters = parse_counters(j, line);
      s.memory = parse_memory(j, line);
      have_summary = true;
    } else {
      throw ConfigError("run log line " + std::to_string(line) + ": unknown type '" + type + "'");
    }
  }
  if (!have_summary) throw ConfigError("run log: missing summary line");
  return log;
}

}  // namespace bilevel::bench
