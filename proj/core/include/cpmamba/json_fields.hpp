#pragma once

#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "cpmamba/errors.hpp"

namespace cpmamba::json_fields {

// Reads j[name] into out. Missing + required -> ConfigError naming the field;
// missing + optional -> out untouched.
template <class T>
void read(const nlohmann::json& j, const std::string& prefix, const char* name, T& out, bool required) {
  const std::string path = prefix.empty() ? std::string(name) : prefix + "." + name;
  auto it = j.find(name);
  if (it == j.end()) {
    if (required) throw ConfigError("missing config field '" + path + "'");
    return;
  }
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + path + "' has the wrong type");
  }
}

inline void reject_unknown(const nlohmann::json& j, const std::string& prefix,
                           std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) {
      throw ConfigError("unknown config field '" + (prefix.empty() ? it.key() : prefix + "." + it.key()) + "'");
    }
  }
}

}  // namespace cpmamba::json_fields
