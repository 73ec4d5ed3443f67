// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "feedforge/errors.hpp"

namespace feedforge {

/// Warehouse column types. Timestamps are int64 milliseconds; the
/// distinction from int64 lives in the schema, not in runtime values.
enum class ColumnType : uint8_t {
  string = 1,
  int64 = 2,
  float64 = 3,
  boolean = 4,
  timestamp = 5,
};

inline const char* column_type_name(ColumnType t) {
  switch (t) {
    case ColumnType::string: return "string";
    case ColumnType::int64: return "int64";
    case ColumnType::float64: return "float64";
    case ColumnType::boolean: return "bool";
    case ColumnType::timestamp: return "timestamp";
  }
  return "?";
}

inline ColumnType column_type_from_code(uint8_t code, size_t offset = Error::npos) {
  if (code < 1 || code > 5) raise(Errc::decode_error, "bad column type code", offset);
  return static_cast<ColumnType>(code);
}

/// A scalar cell value. monostate is SQL NULL.
using Value = std::variant<std::monostate, int64_t, double, bool, std::string>;

inline bool is_null(const Value& v) {
  return std::holds_alternative<std::monostate>(v);
}

// Explicit factory; `Value v = "text"` would pick the bool alternative.
inline Value sv(std::string_view s) { return Value(std::string(s)); }

inline bool is_numeric(ColumnType t) {
  return t == ColumnType::int64 || t == ColumnType::float64 ||
         t == ColumnType::timestamp;
}

/// Can a value of type `from` be stored in a column of type `to`?
/// int64 widens to float64 and feeds timestamp columns; all else exact.
inline bool storable_as(ColumnType from, ColumnType to) {
  if (from == to) return true;
  if (from == ColumnType::int64 &&
      (to == ColumnType::float64 || to == ColumnType::timestamp))
    return true;
  if (from == ColumnType::timestamp && to == ColumnType::int64) return true;
  return false;
}

inline ColumnType value_type(const Value& v) {
  switch (v.index()) {
    case 1: return ColumnType::int64;
    case 2: return ColumnType::float64;
    case 3: return ColumnType::boolean;
    case 4: return ColumnType::string;
    default: raise(Errc::invalid_argument, "null has no value type");
  }
}

/// Three-way compare within a type family. Numerics coerce through long
/// double (the x87 64-bit mantissa represents every int64 exactly).
/// Nulls and cross-family pairs are the caller's problem.
inline int compare_values(const Value& a, const Value& b) {
  auto num = [](const Value& v) -> long double {
    if (const auto* i = std::get_if<int64_t>(&v)) return static_cast<long double>(*i);
    return static_cast<long double>(std::get<double>(v));
  };
  bool a_num = std::holds_alternative<int64_t>(a) || std::holds_alternative<double>(a);
  bool b_num = std::holds_alternative<int64_t>(b) || std::holds_alternative<double>(b);
  if (a_num && b_num) {
    long double x = num(a), y = num(b);
    if (x < y) return -1;
    if (x > y) return 1;
    return 0;
  }
  if (std::holds_alternative<std::string>(a) && std::holds_alternative<std::string>(b)) {
    const auto& x = std::get<std::string>(a);
    const auto& y = std::get<std::string>(b);
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (std::holds_alternative<bool>(a) && std::holds_alternative<bool>(b)) {
    int x = std::get<bool>(a), y = std::get<bool>(b);
    return x - y;
  }
  raise(Errc::type_mismatch, "values are not comparable");
}

inline bool values_equal(const Value& a, const Value& b) {
  if (is_null(a) || is_null(b)) return is_null(a) && is_null(b);
  bool a_num = std::holds_alternative<int64_t>(a) || std::holds_alternative<double>(a);
  bool b_num = std::holds_alternative<int64_t>(b) || std::holds_alternative<double>(b);
  if (a_num != b_num) return false;
  if (!a_num && a.index() != b.index()) return false;
  return compare_values(a, b) == 0;
}

/// Hash consistent with values_equal (numeric 5 == 5.0 hash alike).
struct ValueHash {
  size_t operator()(const Value& v) const {
    if (is_null(v)) return 0x9e3779b9;
    if (const auto* b = std::get_if<bool>(&v)) return *b ? 2 : 1;
    if (const auto* s = std::get_if<std::string>(&v))
      return std::hash<std::string>{}(*s) ^ 0xabcdef;
    long double x = std::holds_alternative<int64_t>(v)
                        ? static_cast<long double>(std::get<int64_t>(v))
                        : static_cast<long double>(std::get<double>(v));
    // Integral doubles hash like the equal int64.
    int64_t trunc = static_cast<int64_t>(x);
    if (static_cast<long double>(trunc) == x)
      return std::hash<int64_t>{}(trunc);
    return std::hash<double>{}(static_cast<double>(x));
  }
};

struct ValueEq {
  bool operator()(const Value& a, const Value& b) const { return values_equal(a, b); }
};

inline nlohmann::json value_to_json(const Value& v) {
  switch (v.index()) {
    case 0: return nullptr;
    case 1: return std::get<int64_t>(v);
    case 2: return std::get<double>(v);
    case 3: return std::get<bool>(v);
    default: return std::get<std::string>(v);
  }
}

/// JSON scalar -> Value. Arrays/objects are not scalars; callers flatten
/// first. Unsigned values beyond int64 fall back to float64.
template <typename Json>
Value value_from_json(const Json& j) {
  if (j.is_null()) return Value{};
  if (j.is_boolean()) return Value(j.template get<bool>());
  if (j.is_number_unsigned()) {
    uint64_t u = j.template get<uint64_t>();
    if (u <= static_cast<uint64_t>(INT64_MAX))
      return Value(static_cast<int64_t>(u));
    return Value(static_cast<double>(u));
  }
  if (j.is_number_integer()) return Value(j.template get<int64_t>());
  if (j.is_number_float()) return Value(j.template get<double>());
  if (j.is_string()) return Value(j.template get<std::string>());
  raise(Errc::invalid_argument, "JSON value is not a scalar");
}

/// Canonical, type-tagged, lossless textual form. Used for row-multiset
/// comparison in tests and for content hashes; doubles print as raw bits.
inline std::string value_repr(const Value& v) {
  switch (v.index()) {
    case 0: return "null";
    case 1: return "i:" + std::to_string(std::get<int64_t>(v));
    case 2: {
      uint64_t bits;
      double d = std::get<double>(v);
      std::memcpy(&bits, &d, 8);
      char buf[20];
      auto [p, _] = std::to_chars(buf, buf + sizeof buf, bits, 16);
      return "f:" + std::string(buf, p);
    }
    case 3: return std::get<bool>(v) ? "b:true" : "b:false";
    default: return "s:" + std::get<std::string>(v);
  }
}

}  // namespace feedforge
