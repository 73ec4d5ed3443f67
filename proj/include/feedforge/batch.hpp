// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "feedforge/errors.hpp"
#include "feedforge/flatten.hpp"
#include "feedforge/hash.hpp"
#include "feedforge/value.hpp"

namespace feedforge {

/// One flattened observation of an observable from one feed.
struct FeedRecord {
  std::string feed_id;
  std::string observable_id;  // 64-char lowercase hex
  int64_t event_time_ms = 0;
  int64_t ingest_time_ms = 0;  // producer-side; not part of the wire format
  FlatMap fields;
  std::optional<std::string> blob_ref;
};

enum class CloseReason { size, age, shutdown };

inline const char* close_reason_name(CloseReason r) {
  switch (r) {
    case CloseReason::size: return "size";
    case CloseReason::age: return "age";
    case CloseReason::shutdown: return "shutdown";
  }
  return "?";
}

inline CloseReason close_reason_from(std::string_view s) {
  if (s == "size") return CloseReason::size;
  if (s == "age") return CloseReason::age;
  if (s == "shutdown") return CloseReason::shutdown;
  raise(Errc::decode_error, "unknown close_reason '" + std::string(s) + "'");
}

/// The unit of queue transport and warehouse insertion.
struct Batch {
  std::string batch_id;
  std::string feed_id;
  std::vector<FeedRecord> records;
  int64_t created_at_ms = 0;
  int64_t closed_at_ms = 0;
  CloseReason close_reason = CloseReason::size;
};

namespace detail {

inline nlohmann::ordered_json record_to_wire(const FeedRecord& r) {
  nlohmann::ordered_json j;
  j["observable_id"] = r.observable_id;
  j["event_time"] = r.event_time_ms;
  nlohmann::ordered_json fields(nlohmann::ordered_json::value_t::object);
  for (const auto& [k, v] : r.fields) fields[k] = value_to_json(v);
  j["fields"] = std::move(fields);
  if (r.blob_ref) j["blob_ref"] = *r.blob_ref;
  return j;
}

}  // namespace detail

/// Wire form: one UTF-8 JSON document
/// {batch_id, feed_id, close_reason, records:[{observable_id, event_time,
/// fields, blob_ref?}]}.
inline std::string serialize_batch(const Batch& b) {
  nlohmann::ordered_json j;
  j["batch_id"] = b.batch_id;
  j["feed_id"] = b.feed_id;
  j["close_reason"] = close_reason_name(b.close_reason);
  nlohmann::ordered_json records(nlohmann::ordered_json::value_t::array);
  for (const auto& r : b.records) records.push_back(detail::record_to_wire(r));
  j["records"] = std::move(records);
  return j.dump();
}

inline Batch parse_batch(std::string_view wire) {
  nlohmann::ordered_json j =
      nlohmann::ordered_json::parse(wire, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object())
    raise(Errc::decode_error, "batch payload is not a JSON object");
  Batch b;
  try {
    b.batch_id = j.at("batch_id").get<std::string>();
    b.feed_id = j.at("feed_id").get<std::string>();
    b.close_reason = close_reason_from(j.at("close_reason").get<std::string>());
    for (const auto& rec : j.at("records")) {
      FeedRecord r;
      r.feed_id = b.feed_id;
      r.observable_id = rec.at("observable_id").get<std::string>();
      if (!is_hex_digest(r.observable_id))
        raise(Errc::decode_error, "observable_id is not a sha256 hex digest");
      if (!rec.at("event_time").is_number_integer() &&
          !rec.at("event_time").is_number_unsigned())
        raise(Errc::decode_error, "event_time must be an integer");
      r.event_time_ms = rec.at("event_time").get<int64_t>();
      for (const auto& [k, v] : rec.at("fields").items()) {
        if (v.is_object() || v.is_array())
          raise(Errc::decode_error, "field '" + k + "' is not a scalar");
        r.fields.emplace_back(k, value_from_json(v));
      }
      if (rec.contains("blob_ref"))
        r.blob_ref = rec.at("blob_ref").get<std::string>();
      b.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::decode_error, std::string("malformed batch: ") + e.what());
  }
  if (b.records.empty())
    raise(Errc::decode_error, "batch has no records");
  return b;
}

/// Deterministic batch id: sequence number for readability plus a content
/// digest so identical re-runs deduplicate and different content never
/// collides.
inline std::string make_batch_id(const std::string& feed_id, uint64_t seq,
                                 const std::vector<FeedRecord>& records) {
  nlohmann::ordered_json arr(nlohmann::ordered_json::value_t::array);
  for (const auto& r : records) arr.push_back(detail::record_to_wire(r));
  std::string digest = sha256_hex(arr.dump());
  return feed_id + "-" + std::to_string(seq) + "-" + digest.substr(0, 12);
}

}  // namespace feedforge
