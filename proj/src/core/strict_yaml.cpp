#include "bilevel/core/strict_yaml.hpp"

#include <fstream>
#include <sstream>

namespace bilevel {

StrictMap::StrictMap(YAML::Node node, std::string path)
    : node_(std::move(node)), path_(std::move(path)) {
  if (node_ && !node_.IsNull() && !node_.IsMap())
    throw ConfigError("section '" + (path_.empty() ? std::string("<root>") : path_) +
                      "' must be a mapping (line " + std::to_string(line_of(node_)) + ")");
}

bool StrictMap::has(const std::string& key) const {
  return node_ && node_.IsMap() && node_[key];
}

std::string StrictMap::qualified(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

int StrictMap::line_of_key(const std::string& key) const {
  if (!has(key)) return 0;
  return line_of(node_[key]);
}

StrictMap StrictMap::map(const std::string& key) {
  consumed_.insert(key);
  return StrictMap(has(key) ? node_[key] : YAML::Node(), qualified(key));
}

YAML::Node StrictMap::raw(const std::string& key) {
  consumed_.insert(key);
  return has(key) ? node_[key] : YAML::Node();
}

Vector StrictMap::vector(const std::string& key) {
  const auto values = require<std::vector<double>>(key);
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

Matrix StrictMap::matrix(const std::string& key) {
  const auto rows = require<std::vector<std::vector<double>>>(key);
  if (rows.empty()) throw ConfigError("key '" + qualified(key) + "' must be a non-empty matrix");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size())
      throw ConfigError("key '" + qualified(key) + "' has ragged rows (line " +
                        std::to_string(line_of_key(key)) + ")");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

void StrictMap::finish() const {
  if (!node_ || !node_.IsMap()) return;
  for (const auto& kv : node_) {
    const auto key = kv.first.as<std::string>();
    if (!consumed_.contains(key))
      throw ConfigError("unknown key '" + qualified(key) + "' (line " +
                        std::to_string(kv.first.Mark().line + 1) + ")");
  }
}

YAML::Node parse_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("malformed document: ") + e.what());
  }
}

YAML::Node load_yaml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_yaml(ss.str());
}

}  // namespace bilevel
