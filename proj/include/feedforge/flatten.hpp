// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "feedforge/errors.hpp"
#include "feedforge/value.hpp"

namespace feedforge {

/// Ordered flattened record fields. Key order is depth-first source order,
/// which is why parsing uses nlohmann::ordered_json throughout ingestion.
using FlatMap = std::vector<std::pair<std::string, Value>>;

inline constexpr size_t kMaxFlattenDepth = 32;

namespace detail {

inline void flatten_into(const nlohmann::ordered_json& node,
                         const std::string& prefix, size_t depth, FlatMap& out) {
  if (depth > kMaxFlattenDepth)
    raise(Errc::too_deep, "nesting exceeds " + std::to_string(kMaxFlattenDepth) +
                              " levels at '" + prefix + "'");
  for (const auto& [key, child] : node.items()) {
    if (key.empty())
      raise(Errc::ambiguous_key, "empty key under '" + prefix + "'");
    if (key.find('.') != std::string::npos)
      raise(Errc::ambiguous_key,
            "key '" + key + "' contains '.' and would collide with path syntax");
    std::string path = prefix.empty() ? key : prefix + "." + key;
    if (child.is_object()) {
      flatten_into(child, path, depth + 1, out);
    } else if (child.is_array()) {
      // Arrays become one canonical compact JSON string; table width stays
      // bounded by the number of distinct field paths.
      out.emplace_back(std::move(path), Value(child.dump()));
    } else {
      out.emplace_back(std::move(path), value_from_json(child));
    }
  }
}

}  // namespace detail

/// Minimal parse-and-flatten: nested objects dot-join their paths, arrays
/// serialize to a compact JSON string, scalars pass through.
inline FlatMap flatten(const nlohmann::ordered_json& doc) {
  if (!doc.is_object())
    raise(Errc::invalid_argument, "flatten expects a JSON object");
  FlatMap out;
  detail::flatten_into(doc, "", 1, out);
  return out;
}

inline const Value* flat_find(const FlatMap& fields, std::string_view key) {
  for (const auto& [k, v] : fields)
    if (k == key) return &v;
  return nullptr;
}

}  // namespace feedforge
