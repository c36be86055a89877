#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "dld/common.hpp"

namespace dld::detail {

inline void require_object(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a table/object");
}

/// Rejects keys outside `known`.
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& what) {
  require_object(j, what);
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in " + what);
    }
  }
}

/// Reads j[key] into out when present, mapping type errors to ConfigError.
template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(what + "." + key + " has the wrong type");
  }
}

}  // namespace dld::detail
