#pragma once

#include <cmath>
#include <json.hpp>
#include <limits>
#include <optional>
#include <string>

#include "aoplab/common.hpp"

namespace aoplab {

// JSON has no infinities or NaN; they travel as the strings "inf", "-inf"
// and "nan" so tables written by the toolkit read back bit-identically.

inline nlohmann::ordered_json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline nlohmann::ordered_json json_number(const std::optional<double>& v) {
  if (!v) return nullptr;
  return json_number(*v);
}

template <typename Json>
double read_number(const Json& j, const std::string& where) {
  if (j.is_number()) return j.template get<double>();
  if (j.is_string()) {
    const auto s = j.template get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw DataError(where + ": expected a number");
}

template <typename Json>
std::optional<double> read_optional_number(const Json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  return read_number(j, where);
}

}  // namespace aoplab
