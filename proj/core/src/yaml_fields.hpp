#pragma once

// Internal helpers for reading YAML mappings with strict key checking.

#include <yaml-cpp/yaml.h>

#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "simsec/config.hpp"
#include "simsec/errors.hpp"

namespace simsec::detail {

class FieldReader {
 public:
  FieldReader(const YAML::Node& node, std::string section) : node_(node), section_(std::move(section)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw ConfigError("section '" + section_ + "' must be a mapping");
    }
  }

  [[nodiscard]] bool present() const { return node_ && node_.IsMap(); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (auto v = get(key)) out = convert<T>(key, v);
  }

  template <typename T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    if (auto v = get(key)) out = convert<T>(key, v);
  }

  template <typename T>
  void read_list(const std::string& key, std::vector<T>& out) {
    if (auto v = get(key)) {
      if (!v.IsSequence()) throw ConfigError(where(key) + " must be a list");
      out.clear();
      for (const auto& item : v) out.push_back(convert<T>(key, item));
    }
  }

  /// Raw node for keys needing custom parsing (units, enums).
  YAML::Node get(const std::string& key) {
    if (!present()) return YAML::Node(YAML::NodeType::Undefined);
    seen_.insert(key);
    const YAML::Node& node = node_;
    return node[key];
  }

  [[nodiscard]] std::string where(const std::string& key) const { return section_ + "." + key; }

  /// Rejects keys that were never requested.
  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.contains(key)) throw ConfigError("unknown key '" + where(key) + "'");
    }
  }

 private:
  template <typename T>
  T convert(const std::string& key, const YAML::Node& v) const {
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        const long long x = v.as<long long>();
        if (x < 0) throw ConfigError("'" + where(key) + "' must be non-negative");
        return static_cast<T>(x);
      } else {
        return v.as<T>();
      }
    } catch (const YAML::Exception&) {
      throw ConfigError("invalid value for '" + where(key) + "'");
    }
  }

  YAML::Node node_;
  std::string section_;
  std::set<std::string> seen_;
};

/// Reads the scenario mapping into `cfg` and validates it (config.cpp).
void read_system_config(const YAML::Node& node, SystemConfig& cfg);

inline YAML::Node load_yaml_text(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

}  // namespace simsec::detail
