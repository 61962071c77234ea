#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "optikit/errors.hpp"

namespace optikit {

// Strict config helpers: configs may not carry unknown keys, and type
// mismatches are reported with the offending field path.

inline void require_object(const nlohmann::json& j, const std::string& ctx) {
  if (!j.is_object()) {
    throw ConfigError(ctx + " must be a JSON object");
  }
}

inline void check_keys(const nlohmann::json& obj,
                       std::initializer_list<std::string_view> allowed,
                       const std::string& ctx) {
  require_object(obj, ctx);
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + item.key() + "' in " + ctx);
    }
  }
}

template <typename T>
T get_field(const nlohmann::json& obj, const std::string& key,
            const std::string& ctx) {
  if (!obj.contains(key)) {
    throw ConfigError("missing field '" + key + "' in " + ctx);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + key + "' in " + ctx + " has the wrong type");
  }
}

template <typename T>
T get_field_or(const nlohmann::json& obj, const std::string& key,
               const std::string& ctx, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + key + "' in " + ctx + " has the wrong type");
  }
}

}  // namespace optikit
