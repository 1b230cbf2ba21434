#pragma once

// Strict JSON field access shared by the scenario and run-config readers.

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

#include <json.hpp>

#include <lodom/error.hpp>
#include <lodom/geometry.hpp>

namespace lodom::detail {

using json = nlohmann::json;

inline json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("invalid JSON: ") + e.what());
  }
}

/// Rejects non-objects and keys outside `allowed`.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) {
    throw Error(ErrorCode::schema_error, std::string(where) + " must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw Error(ErrorCode::schema_error, std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

inline Vec3 vec_from(const json& j, const char* where) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::schema_error, std::string(where) + " must be an array of 3 numbers");
  }
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[static_cast<std::size_t>(k)].is_number()) {
      throw Error(ErrorCode::schema_error, std::string(where) + " must be an array of 3 numbers");
    }
    v(k) = j[static_cast<std::size_t>(k)].get<double>();
  }
  return v;
}

inline json vec_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  const json& v = j.at(key);
  bool ok = false;
  if constexpr (std::is_same_v<T, bool>) {
    ok = v.is_boolean();
  } else if constexpr (std::is_unsigned_v<T>) {
    ok = v.is_number_unsigned();
  } else if constexpr (std::is_integral_v<T>) {
    ok = v.is_number_integer();
  } else if constexpr (std::is_floating_point_v<T>) {
    ok = v.is_number();
  } else {
    ok = v.is_string();
  }
  if (!ok) {
    throw Error(ErrorCode::schema_error, std::string("key '") + key + "' has the wrong type");
  }
  return v.get<T>();
}

}  // namespace lodom::detail
