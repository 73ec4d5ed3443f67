// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Lockstep driver: runs one randomized op schedule against both the real
// queue and the reference model, comparing every result; then crashes
// (optionally at a random WAL byte), recovers and compares state; then
// drains to completion and checks that every message ended exactly once —
// acknowledged or dead-lettered. Throws std::runtime_error on mismatch.

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "feedforge/queue.hpp"
#include "feedforge/rng.hpp"
#include "support/reference_queue.hpp"

namespace fftest {

namespace model_detail {

inline void ensure(bool ok, uint64_t seed, const std::string& what) {
  if (!ok)
    throw std::runtime_error("model mismatch (seed " + std::to_string(seed) +
                             "): " + what);
}

inline feedforge::Bytes read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return feedforge::Bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& p,
                       std::span<const uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace model_detail

inline void run_lockstep_model_check(uint64_t seed,
                                     const std::filesystem::path& wal,
                                     bool byte_level_crash) {
  using namespace model_detail;
  using feedforge::DurableQueue;
  using feedforge::QueueConfig;
  using feedforge::ReceiptHandle;
  using feedforge::Rng;

  std::filesystem::remove(wal);
  Rng rng(seed);
  QueueConfig cfg;
  cfg.wal_path = wal;
  cfg.visibility_timeout_ms = 10 + static_cast<int64_t>(rng.below(50));
  cfg.max_receives = 1 + static_cast<uint32_t>(rng.below(4));
  auto impl = std::make_unique<DurableQueue>(cfg);
  ReferenceQueue model(cfg.visibility_timeout_ms, cfg.max_receives);

  struct TrackedHandle {
    ReceiptHandle real;
    uint64_t model_seq;
  };
  std::vector<TrackedHandle> handles;
  std::set<uint64_t> all_ids;
  int64_t now = 0;
  size_t ops = 5 + rng.below(60);
  for (size_t op = 0; op < ops; ++op) {
    double kind = rng.next_unit();
    if (kind < 0.35) {
      std::string body = "b" + std::to_string(rng.below(1000));
      uint64_t got = impl->enqueue(body, now);
      uint64_t want = model.enqueue(body, now);
      ensure(got == want, seed, "enqueue id");
      all_ids.insert(got);
    } else if (kind < 0.70) {
      size_t max_messages = 1 + rng.below(5);
      auto got = impl->receive(max_messages, now);
      auto want = model.receive(max_messages, now);
      ensure(got.size() == want.size(), seed, "receive count");
      for (size_t i = 0; i < got.size(); ++i) {
        ensure(got[i].message.message_id == want[i].id, seed, "receive id");
        ensure(got[i].message.receive_count == want[i].receive_count, seed,
               "receive_count");
        handles.push_back({got[i].handle, want[i].seq});
      }
    } else if (kind < 0.90 && !handles.empty()) {
      size_t pick = rng.below(handles.size());
      bool got = impl->delete_message(handles[pick].real);
      bool want = model.delete_message(handles[pick].real.message_id,
                                       handles[pick].model_seq);
      ensure(got == want, seed, "delete result");
    } else {
      now += 1 + static_cast<int64_t>(
                     rng.below(2 * static_cast<uint64_t>(cfg.visibility_timeout_ms)));
    }
  }

  // Crash, optionally shearing the log at a random byte.
  impl.reset();
  uint64_t cut = model.wal_size();
  if (byte_level_crash) {
    feedforge::Bytes bytes = read_file(wal);
    ensure(bytes.size() == model.wal_size(), seed, "journal byte accounting");
    cut = rng.below(bytes.size() + 1);
    write_file(wal, std::span<const uint8_t>(bytes.data(), cut));
  }
  ReferenceQueue expected = ReferenceQueue::replay_prefix(
      cfg.visibility_timeout_ms, cfg.max_receives, model.journal(), cut);

  DurableQueue recovered(cfg);
  auto want = expected.snapshot();
  std::vector<std::tuple<uint64_t, std::string, int64_t, uint32_t>> got_live;
  for (const auto& m : recovered.live_messages()) {
    ensure(m.visible_at_ms == 0, seed, "recovered message not visible");
    got_live.emplace_back(
        m.message_id, std::string(m.body.begin(), m.body.end()),
        m.enqueued_at_ms, m.receive_count);
  }
  std::sort(got_live.begin(), got_live.end());
  ensure(got_live == want.live, seed, "live state after recovery");
  std::vector<uint64_t> got_dlq;
  for (const auto& m : recovered.dead_letters()) got_dlq.push_back(m.message_id);
  ensure(got_dlq == want.dlq, seed, "dlq order after recovery");

  // Completion: everything enqueued before the cut ends exactly once as
  // durably-deleted, drain-acknowledged, or dead-lettered.
  std::set<uint64_t> surviving_ids, durably_deleted;
  for (const auto& e : model.journal()) {
    if (e.offset + e.size > cut) break;
    if (e.kind == ReferenceQueue::DurableEvent::Kind::enqueue)
      surviving_ids.insert(e.id);
    if (e.kind == ReferenceQueue::DurableEvent::Kind::del)
      durably_deleted.insert(e.id);
  }
  std::set<uint64_t> acked;
  int64_t drain_now = 0;
  for (;;) {
    auto got = recovered.receive(16, drain_now);
    if (got.empty()) {
      auto stats = recovered.stats();
      if (stats.visible == 0 && stats.in_flight == 0) break;
      drain_now += cfg.visibility_timeout_ms + 1;
      continue;
    }
    for (auto& d : got) {
      ensure(recovered.delete_message(d.handle), seed, "drain delete");
      acked.insert(d.message.message_id);
    }
  }
  std::set<uint64_t> dead;
  for (const auto& m : recovered.dead_letters()) dead.insert(m.message_id);
  size_t covered = 0;
  for (uint64_t id : surviving_ids) {
    int ways = (durably_deleted.count(id) ? 1 : 0) + (acked.count(id) ? 1 : 0) +
               (dead.count(id) ? 1 : 0);
    ensure(ways == 1, seed, "message " + std::to_string(id) +
                               " ended " + std::to_string(ways) + " ways");
    ++covered;
  }
  ensure(covered == surviving_ids.size(), seed, "coverage accounting");
}

}  // namespace fftest
