#pragma once

// Schema-checked accessors over nlohmann::json. Every accessor takes the JSON
// path of the value so errors can name the offending field.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "drcnn/error.hpp"

namespace drcnn::json_util {

using nlohmann::json;

inline json parse(std::string_view document) {
  try {
    return json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
}

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline std::string join(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

inline const json& object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "<root>" : path, "expected object");
  return j;
}

inline const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected array");
  return j;
}

inline const json& field(const json& obj, std::string_view key, const std::string& path) {
  object(obj, path);
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(join(path, key), "missing field");
  return *it;
}

inline const json* optional_field(const json& obj, std::string_view key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected integer");
  return j.get<std::int64_t>();
}

inline double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "expected finite number");
  return v;
}

inline bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected boolean");
  return j.get<bool>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected string");
  return j.get<std::string>();
}

inline std::uint64_t as_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw SchemaError(path, "expected non-negative integer");
}

inline std::int64_t get_int(const json& obj, std::string_view key, const std::string& path) {
  return as_int(field(obj, key, path), join(path, key));
}
inline double get_double(const json& obj, std::string_view key, const std::string& path) {
  return as_double(field(obj, key, path), join(path, key));
}
inline bool get_bool(const json& obj, std::string_view key, const std::string& path) {
  return as_bool(field(obj, key, path), join(path, key));
}

}  // namespace drcnn::json_util
