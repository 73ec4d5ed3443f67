// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"
#include "feedforge/wal.hpp"

namespace feedforge {

inline constexpr size_t kMaxQueueBody = 1u << 20;  // 1 MiB

struct QueueConfig {
  std::string name = "queue";
  int64_t visibility_timeout_ms = 30'000;
  uint32_t max_receives = 5;
  std::filesystem::path wal_path;
  bool fsync_on_append = false;
};

struct QueueMessage {
  uint64_t message_id = 0;
  Bytes body;
  int64_t enqueued_at_ms = 0;
  int64_t visible_at_ms = 0;
  uint32_t receive_count = 0;
};

/// Token issued with each delivery; good for delete until the message
/// becomes visible again (timeout expiry or redelivery).
struct ReceiptHandle {
  uint64_t message_id = 0;
  uint64_t receive_seq = 0;
};

struct Delivery {
  QueueMessage message;
  ReceiptHandle handle;
};

struct QueueStats {
  size_t visible = 0;
  size_t in_flight = 0;
  size_t dead_lettered = 0;
  int64_t watermark_ms = 0;
};

/// Durable at-least-once queue over a single write-ahead log.
///
/// Delivery is FIFO by (enqueued_at, message_id). Time never comes from
/// the system: receive() takes the caller's clock, and the queue remembers
/// the highest time it has seen (the watermark) to judge handle staleness.
/// Crash recovery replays the log; in-flight messages come back visible
/// with their receive counts intact.
class DurableQueue {
 public:
  explicit DurableQueue(QueueConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.visibility_timeout_ms < 1)
      raise(Errc::config_error, "visibility_timeout_ms must be >= 1");
    if (cfg_.max_receives < 1)
      raise(Errc::config_error, "max_receives must be >= 1");
    if (cfg_.wal_path.empty())
      raise(Errc::config_error, "queue requires a wal_path");
    recover();
  }

  const QueueConfig& config() const { return cfg_; }

  uint64_t enqueue(std::span<const uint8_t> body, int64_t now_ms) {
    if (body.size() > kMaxQueueBody)
      raise(Errc::oversized_body,
            "body of " + std::to_string(body.size()) + " bytes exceeds 1 MiB");
    std::lock_guard lock(mu_);
    uint64_t id = next_id_;
    Bytes payload;
    payload.reserve(16 + body.size());
    put_u64(payload, id);
    put_i64(payload, now_ms);
    payload.insert(payload.end(), body.begin(), body.end());
    wal_.append(wal::kOpEnqueue, payload);  // throws before any state change
    next_id_ = id + 1;
    Entry e;
    e.body.assign(body.begin(), body.end());
    e.enqueued_at = now_ms;
    e.visible_at = 0;  // immediately visible
    live_.emplace(id, std::move(e));
    order_.emplace(now_ms, id);
    return id;
  }

  uint64_t enqueue(std::string_view body, int64_t now_ms) {
    return enqueue(as_bytes(body), now_ms);
  }

  std::vector<Delivery> receive(size_t max_messages, int64_t now_ms) {
    if (max_messages < 1)
      raise(Errc::invalid_argument, "max_messages must be >= 1");
    std::lock_guard lock(mu_);
    if (now_ms > watermark_) watermark_ = now_ms;
    std::vector<Delivery> out;
    auto it = order_.begin();
    while (it != order_.end() && out.size() < max_messages) {
      uint64_t id = it->second;
      Entry& e = live_.at(id);
      if (e.visible_at > now_ms) {
        ++it;
        continue;
      }
      if (e.receive_count + 1 > cfg_.max_receives) {
        Bytes payload;
        put_u64(payload, id);
        wal_.append(wal::kOpDlqMove, payload);
        dlq_.push_back(to_message(id, e));
        live_.erase(id);
        it = order_.erase(it);
        continue;
      }
      Bytes payload;
      put_u64(payload, id);
      wal_.append(wal::kOpReceive, payload);
      e.receive_count += 1;
      e.visible_at = now_ms + cfg_.visibility_timeout_ms;
      e.current_seq = next_seq_++;
      out.push_back(Delivery{to_message(id, e), ReceiptHandle{id, e.current_seq}});
      ++it;
    }
    return out;
  }

  /// Acknowledge (the spec's `delete`). Returns false, with no state
  /// change, for stale handles: the message was already deleted, was
  /// redelivered, or its visibility timeout has lapsed under the watermark.
  bool delete_message(const ReceiptHandle& handle) {
    std::lock_guard lock(mu_);
    auto it = live_.find(handle.message_id);
    if (it == live_.end()) return false;
    Entry& e = it->second;
    if (e.current_seq == 0 || e.current_seq != handle.receive_seq) return false;
    if (watermark_ >= e.visible_at) return false;  // visible again -> stale
    Bytes payload;
    put_u64(payload, handle.message_id);
    wal_.append(wal::kOpDelete, payload);
    order_.erase({e.enqueued_at, handle.message_id});
    live_.erase(it);
    return true;
  }

  std::vector<QueueMessage> dead_letters() const {
    std::lock_guard lock(mu_);
    return dlq_;
  }

  /// Read-only view of undelivered state in FIFO order, for diagnostics;
  /// does not count as a receive.
  std::vector<QueueMessage> live_messages() const {
    std::lock_guard lock(mu_);
    std::vector<QueueMessage> out;
    out.reserve(live_.size());
    for (const auto& key : order_) out.push_back(to_message(key.second, live_.at(key.second)));
    return out;
  }

  QueueStats stats() const {
    std::lock_guard lock(mu_);
    QueueStats s;
    s.dead_lettered = dlq_.size();
    s.watermark_ms = watermark_;
    for (const auto& [id, e] : live_) {
      if (e.visible_at <= watermark_)
        ++s.visible;
      else
        ++s.in_flight;
    }
    return s;
  }

  size_t live_count() const {
    std::lock_guard lock(mu_);
    return live_.size();
  }

 private:
  struct Entry {
    Bytes body;
    int64_t enqueued_at = 0;
    int64_t visible_at = 0;
    uint32_t receive_count = 0;
    uint64_t current_seq = 0;  // 0 == never received since recovery
  };

  static QueueMessage to_message(uint64_t id, const Entry& e) {
    QueueMessage m;
    m.message_id = id;
    m.body = e.body;
    m.enqueued_at_ms = e.enqueued_at;
    m.visible_at_ms = e.visible_at;
    m.receive_count = e.receive_count;
    return m;
  }

  void recover() {
    auto scan = wal::scan_file(cfg_.wal_path);
    for (const auto& rec : scan.records) {
      ByteReader r(rec.payload);
      switch (rec.opcode) {
        case wal::kOpEnqueue: {
          uint64_t id = r.u64();
          int64_t at = r.i64();
          Entry e;
          auto body = r.take(r.remaining());
          e.body.assign(body.begin(), body.end());
          e.enqueued_at = at;
          e.visible_at = 0;
          live_.emplace(id, std::move(e));
          order_.emplace(at, id);
          if (id >= next_id_) next_id_ = id + 1;
          break;
        }
        case wal::kOpReceive: {
          uint64_t id = r.u64();
          auto it = live_.find(id);
          if (it == live_.end())
            raise(Errc::corrupt_log, "receive of unknown message", rec.offset);
          it->second.receive_count += 1;
          break;
        }
        case wal::kOpDelete: {
          uint64_t id = r.u64();
          auto it = live_.find(id);
          if (it == live_.end())
            raise(Errc::corrupt_log, "delete of unknown message", rec.offset);
          order_.erase({it->second.enqueued_at, id});
          live_.erase(it);
          break;
        }
        case wal::kOpDlqMove: {
          uint64_t id = r.u64();
          auto it = live_.find(id);
          if (it == live_.end())
            raise(Errc::corrupt_log, "dlq-move of unknown message", rec.offset);
          dlq_.push_back(to_message(id, it->second));
          order_.erase({it->second.enqueued_at, id});
          live_.erase(it);
          break;
        }
        default:
          raise(Errc::corrupt_log, "unknown opcode", rec.offset);
      }
    }
    // Recovered in-flight messages are immediately visible (visible_at was
    // never persisted) and their handles are gone: current_seq == 0.
    wal_.open(cfg_.wal_path, scan.valid_bytes, cfg_.fsync_on_append);
  }

  mutable std::mutex mu_;
  QueueConfig cfg_;
  std::unordered_map<uint64_t, Entry> live_;
  std::set<std::pair<int64_t, uint64_t>> order_;  // (enqueued_at, id)
  std::vector<QueueMessage> dlq_;
  uint64_t next_id_ = 1;
  uint64_t next_seq_ = 1;
  int64_t watermark_ = 0;
  wal::Writer wal_;
};

}  // namespace feedforge
