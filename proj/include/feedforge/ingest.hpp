// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "feedforge/batch.hpp"
#include "feedforge/batcher.hpp"
#include "feedforge/blobstore.hpp"
#include "feedforge/clock.hpp"
#include "feedforge/features.hpp"
#include "feedforge/feeds.hpp"
#include "feedforge/queue.hpp"
#include "feedforge/rng.hpp"
#include "feedforge/warehouse.hpp"

namespace feedforge {

struct BatchCloseInfo {
  std::string batch_id;
  CloseReason reason = CloseReason::size;
  int64_t created_at_ms = 0;
  int64_t closed_at_ms = 0;
  size_t size = 0;
};

struct ProducerReport {
  uint64_t records_read = 0;
  uint64_t malformed_skipped = 0;
  uint64_t batches_emitted = 0;
  std::vector<BatchCloseInfo> batches;
};

struct ProducerOptions {
  int64_t tick_interval_ms = 1000;
  bool log_skips = true;
};

namespace detail {

/// Envelope keys live outside the flattened field map.
inline std::optional<FeedRecord> parse_feed_document(const std::string& feed_id,
                                                     const std::string& raw,
                                                     int64_t ingest_now,
                                                     std::string* why) {
  nlohmann::ordered_json doc =
      nlohmann::ordered_json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    if (why) *why = "not a JSON object";
    return std::nullopt;
  }
  if (!doc.contains("observable_id") || !doc["observable_id"].is_string()) {
    if (why) *why = "missing observable_id";
    return std::nullopt;
  }
  FeedRecord record;
  record.feed_id = feed_id;
  record.observable_id = doc["observable_id"].get<std::string>();
  if (!is_hex_digest(record.observable_id)) {
    if (why) *why = "observable_id is not a sha256 hex digest";
    return std::nullopt;
  }
  if (!doc.contains("event_time") ||
      !(doc["event_time"].is_number_integer() ||
        doc["event_time"].is_number_unsigned())) {
    if (why) *why = "missing integer event_time";
    return std::nullopt;
  }
  record.event_time_ms = doc["event_time"].get<int64_t>();
  record.ingest_time_ms = ingest_now;
  if (doc.contains("blob_ref")) {
    if (!doc["blob_ref"].is_string()) {
      if (why) *why = "blob_ref must be a string";
      return std::nullopt;
    }
    record.blob_ref = doc["blob_ref"].get<std::string>();
  }
  doc.erase("observable_id");
  doc.erase("event_time");
  doc.erase("blob_ref");
  try {
    record.fields = flatten(doc);
  } catch (const Error& e) {
    if (why) *why = e.what();
    return std::nullopt;
  }
  return record;
}

}  // namespace detail

/// Pull every adapter record, flatten, batch, and enqueue each closed
/// batch; a final flush ships the remainder. Unparseable records are
/// counted and skipped; a queue failure stops the run after logging the
/// unsent batch.
inline ProducerReport run_producer(const FeedConfig& feed, DurableQueue& queue,
                                   Clock& clock,
                                   const ProducerOptions& options = {}) {
  auto adapter = make_adapter(feed);
  Batcher batcher(feed.feed_id, feed.max_batch_size, feed.max_batch_age_ms);
  ProducerReport report;

  auto emit = [&](Batch&& batch) {
    std::string wire = serialize_batch(batch);
    try {
      queue.enqueue(std::string_view(wire), clock.now_ms());
    } catch (const Error& e) {
      std::cerr << "[" << feed.feed_id << "] batch " << batch.batch_id << " ("
                << batch.records.size() << " records) not enqueued: " << e.what()
                << "\n";
      throw;
    }
    ++report.batches_emitted;
    report.batches.push_back({batch.batch_id, batch.close_reason,
                              batch.created_at_ms, batch.closed_at_ms,
                              batch.records.size()});
  };

  int64_t last_tick = clock.now_ms();
  while (auto raw = adapter->next(clock)) {
    int64_t now = clock.now_ms();
    while (last_tick + options.tick_interval_ms <= now) {
      last_tick += options.tick_interval_ms;
      if (auto batch = batcher.tick(last_tick)) emit(std::move(*batch));
    }
    std::string why;
    auto record = detail::parse_feed_document(feed.feed_id, *raw, now, &why);
    if (!record) {
      ++report.malformed_skipped;
      if (options.log_skips)
        std::cerr << "[" << feed.feed_id << "] skipping record: " << why << "\n";
      continue;
    }
    ++report.records_read;
    if (auto batch = batcher.offer(std::move(*record), now)) emit(std::move(*batch));
  }
  if (auto batch = batcher.flush()) emit(std::move(*batch));
  return report;
}

/// Test hook for at-least-once schedules: drop acks at a seeded rate and
/// optionally crash (return early) after N applied batches.
struct FaultPlan {
  double skip_delete_rate = 0.0;
  uint64_t seed = 0;
  int64_t crash_after_batches = -1;
};

struct ConsumerOptions {
  size_t max_messages_per_receive = 16;
  std::optional<FaultPlan> fault;
  // A lone consumer may jump the logical clock past the visibility timeout
  // to pick up unacknowledged messages. Pool workers must not: a peer may
  // still be mid-batch, and expiring its handles would force spurious
  // redelivery. The pool orchestrator advances time between rounds instead.
  bool advance_clock_when_starved = true;
};

struct ConsumerReport {
  uint64_t batches_applied = 0;
  uint64_t records_inserted = 0;
  uint64_t duplicates_skipped = 0;
  uint64_t blobs_stored = 0;
  uint64_t poison_skipped = 0;
  bool crashed = false;
};

namespace detail {

/// Blob-target batches carry a "features" array per record; the consumer
/// stores the encoded vector and rewrites the record to carry its ref.
inline Batch to_feature_metadata(const Batch& batch, BlobStore& store,
                                 uint64_t* blobs_stored) {
  Batch meta;
  meta.batch_id = batch.batch_id;
  meta.feed_id = batch.feed_id;
  meta.created_at_ms = batch.created_at_ms;
  meta.closed_at_ms = batch.closed_at_ms;
  meta.close_reason = batch.close_reason;
  for (const auto& record : batch.records) {
    const Value* features = flat_find(record.fields, "features");
    if (!features || !std::holds_alternative<std::string>(*features))
      raise(Errc::decode_error,
            "feature record without a 'features' array for observable " +
                record.observable_id);
    nlohmann::json values = nlohmann::json::parse(
        std::get<std::string>(*features), nullptr, /*allow_exceptions=*/false);
    if (values.is_discarded() || !values.is_array())
      raise(Errc::decode_error, "unparseable features array");
    FeatureVector fv;
    fv.observable_id = record.observable_id;
    for (const auto& v : values) {
      if (!v.is_number())
        raise(Errc::decode_error, "feature values must be numbers");
      fv.values.push_back(v.get<float>());
    }
    BlobRef ref = store.put(encode_features(fv));
    ++*blobs_stored;
    FeedRecord out;
    out.feed_id = record.feed_id;
    out.observable_id = record.observable_id;
    out.event_time_ms = record.event_time_ms;
    out.ingest_time_ms = record.ingest_time_ms;
    out.blob_ref = ref.address;
    out.fields.emplace_back("dims", Value(static_cast<int64_t>(fv.dims())));
    meta.records.push_back(std::move(out));
  }
  return meta;
}

}  // namespace detail

/// Drain the queue into the warehouse / blob store: apply, then delete, so
/// a crash redelivers and idempotent insertion deduplicates. Malformed or
/// unroutable batches are left unacknowledged and age into the DLQ.
inline ConsumerReport run_consumer(DurableQueue& queue, Warehouse& warehouse,
                                   BlobStore& blobstore, Clock& clock,
                                   const std::map<std::string, FeedConfig>& feeds,
                                   const ConsumerOptions& options = {}) {
  ConsumerReport report;
  Rng fault_rng(options.fault ? options.fault->seed : 0);

  for (;;) {
    auto deliveries = queue.receive(options.max_messages_per_receive, clock.now_ms());
    if (deliveries.empty()) {
      QueueStats stats = queue.stats();
      if (stats.visible == 0 && stats.in_flight == 0) break;
      if (stats.visible > 0) continue;  // raced another consumer; poll again
      if (!options.advance_clock_when_starved) break;
      // Wait out the visibility timeout so unacked messages come back.
      clock.advance_ms(queue.config().visibility_timeout_ms + 1);
      continue;
    }
    for (auto& delivery : deliveries) {
      bool applied = false;
      try {
        std::string_view wire(
            reinterpret_cast<const char*>(delivery.message.body.data()),
            delivery.message.body.size());
        Batch batch = parse_batch(wire);
        auto feed = feeds.find(batch.feed_id);
        if (feed == feeds.end())
          raise(Errc::config_error, "no feed config for '" + batch.feed_id + "'");
        const FeedTarget& target = feed->second.target;
        warehouse.ensure_feed_table(target.table);
        InsertResult result;
        if (target.kind == FeedTarget::Kind::warehouse_table) {
          result = warehouse.insert_batch(target.table, batch);
        } else {
          Batch meta =
              detail::to_feature_metadata(batch, blobstore, &report.blobs_stored);
          result = warehouse.insert_batch(target.table, meta);
        }
        ++report.batches_applied;
        if (result.skipped_duplicate)
          report.duplicates_skipped += batch.records.size();
        else
          report.records_inserted += result.inserted;
        applied = true;
      } catch (const Error&) {
        ++report.poison_skipped;  // no delete; redelivery then DLQ
      }
      if (!applied) continue;
      if (options.fault) {
        if (options.fault->crash_after_batches >= 0 &&
            static_cast<int64_t>(report.batches_applied) >=
                options.fault->crash_after_batches) {
          report.crashed = true;  // applied but never acknowledged
          return report;
        }
        if (fault_rng.chance(options.fault->skip_delete_rate)) continue;
      }
      queue.delete_message(delivery.handle);
    }
  }
  return report;
}

}  // namespace feedforge
