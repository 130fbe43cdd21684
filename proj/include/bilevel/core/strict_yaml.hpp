#pragma once

#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "bilevel/core/error.hpp"
#include "bilevel/core/types.hpp"

namespace bilevel {

/// Read-once view over a YAML mapping that rejects unknown keys.
///
/// Every accessor marks its key as consumed; finish() throws ConfigError
/// naming the first unconsumed key in document order with its line number.
class StrictMap {
 public:
  StrictMap(YAML::Node node, std::string path);

  [[nodiscard]] bool has(const std::string& key) const;

  template <class T>
  T get(const std::string& key, const T& fallback) {
    if (!has(key)) {
      consumed_.insert(key);
      return fallback;
    }
    return require<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    consumed_.insert(key);
    const YAML::Node child = node_[key];
    if (!child) throw ConfigError("missing required key '" + qualified(key) + "'");
    try {
      return child.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("invalid value for key '" + qualified(key) + "' (line " +
                        std::to_string(line_of(child)) + ")");
    }
  }

  /// Nested mapping; absent keys give an empty mapping.
  [[nodiscard]] StrictMap map(const std::string& key);
  [[nodiscard]] YAML::Node raw(const std::string& key);

  [[nodiscard]] Vector vector(const std::string& key);
  [[nodiscard]] Matrix matrix(const std::string& key);

  [[nodiscard]] int line_of_key(const std::string& key) const;
  [[nodiscard]] std::string qualified(const std::string& key) const;

  void finish() const;

 private:
  static int line_of(const YAML::Node& n) { return n.Mark().line + 1; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> consumed_;
};

/// Parses a YAML document from text; syntax errors become ConfigError.
[[nodiscard]] YAML::Node parse_yaml(const std::string& text);
[[nodiscard]] YAML::Node load_yaml_file(const std::string& path);

}  // namespace bilevel
