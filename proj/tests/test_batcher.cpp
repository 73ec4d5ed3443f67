// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "feedforge/batcher.hpp"
#include "feedforge/rng.hpp"

using namespace feedforge;

namespace {

FeedRecord record(int i) {
  FeedRecord r;
  r.feed_id = "feed";
  r.observable_id = std::string(64, 'a');
  r.event_time_ms = i;
  return r;
}

}  // namespace

TEST_CASE("size closes exactly at max_batch_size", "[batcher]") {
  Batcher b("feed", 3, 10'000);
  CHECK_FALSE(b.offer(record(1), 0).has_value());
  CHECK_FALSE(b.offer(record(2), 1).has_value());
  auto batch = b.offer(record(3), 2);
  REQUIRE(batch.has_value());
  CHECK(batch->records.size() == 3);
  CHECK(batch->close_reason == CloseReason::size);
  CHECK(batch->created_at_ms == 0);
  CHECK(batch->closed_at_ms == 2);
}

TEST_CASE("max_batch_size of one emits per offer", "[batcher]") {
  Batcher b("feed", 1, 10'000);
  auto batch = b.offer(record(1), 5);
  REQUIRE(batch.has_value());
  CHECK(batch->records.size() == 1);
}

TEST_CASE("ten offers at size four leave two pending", "[batcher]") {
  Batcher b("feed", 4, 10'000);
  int emitted = 0;
  for (int i = 0; i < 10; ++i)
    if (auto batch = b.offer(record(i), i)) {
      ++emitted;
      CHECK(batch->records.size() == 4);
    }
  CHECK(emitted == 2);
  CHECK(b.pending() == 2);
}

TEST_CASE("age closes at the limit, never early, never empty", "[batcher]") {
  Batcher b("feed", 100, 2000);
  CHECK_FALSE(b.tick(99'999).has_value());  // empty batch never emits
  b.offer(record(1), 0);
  CHECK_FALSE(b.tick(1999).has_value());
  auto batch = b.tick(2000);
  REQUIRE(batch.has_value());
  CHECK(batch->close_reason == CloseReason::age);
  CHECK(batch->closed_at_ms - batch->created_at_ms == 2000);
}

TEST_CASE("the age window restarts when a batch closes", "[batcher]") {
  Batcher b("feed", 2, 2000);
  b.offer(record(1), 0);
  auto closed = b.offer(record(2), 10);  // size close at t=10
  REQUIRE(closed.has_value());
  b.offer(record(3), 15);  // new window starts at 15
  CHECK_FALSE(b.tick(2014).has_value());
  auto aged = b.tick(2015);
  REQUIRE(aged.has_value());
  CHECK(aged->created_at_ms == 15);
}

TEST_CASE("flush ships the remainder as shutdown", "[batcher]") {
  Batcher b("feed", 10, 1000);
  CHECK_FALSE(b.flush().has_value());
  b.offer(record(1), 0);
  b.offer(record(2), 1);
  auto batch = b.flush();
  REQUIRE(batch.has_value());
  CHECK(batch->records.size() == 2);
  CHECK(batch->close_reason == CloseReason::shutdown);
  CHECK_FALSE(b.flush().has_value());
}

TEST_CASE("offer/flush alternation puts every record in exactly one batch",
          "[batcher]") {
  // exhaustive over the four 2-op schedules after each offer
  for (int mask = 0; mask < 4; ++mask) {
    Batcher b("feed", 10, 1000);
    std::multiset<int64_t> seen;
    auto account = [&](const std::optional<Batch>& batch) {
      if (!batch) return;
      for (const auto& r : batch->records) seen.insert(r.event_time_ms);
    };
    account(b.offer(record(1), 0));
    if (mask & 1) account(b.flush());
    account(b.offer(record(2), 1));
    if (mask & 2) account(b.flush());
    account(b.flush());
    CHECK(seen == std::multiset<int64_t>{1, 2});
  }
}

TEST_CASE("random schedules: exactly-one-batch, size and latency bounds",
          "[batcher][property]") {
  for (uint64_t seed = 1; seed <= 200; ++seed) {
    Rng rng(seed);
    size_t max_size = 1 + rng.below(6);
    int64_t max_age = 50 + static_cast<int64_t>(rng.below(500));
    Batcher b("feed", max_size, max_age);
    std::multiset<int64_t> offered, batched;
    int64_t now = 0;
    auto account = [&](std::optional<Batch> batch) {
      if (!batch) return;
      CHECK(batch->records.size() >= 1);
      CHECK(batch->records.size() <= max_size);
      if (batch->close_reason == CloseReason::age) {
        CHECK(batch->closed_at_ms - batch->created_at_ms >= max_age);
        CHECK(batch->closed_at_ms - batch->created_at_ms <= max_age + 10);
      }
      for (const auto& r : batch->records) batched.insert(r.event_time_ms);
    };
    size_t ops = 5 + rng.below(100);
    int64_t next_id = 0;
    for (size_t i = 0; i < ops; ++i) {
      if (rng.chance(0.7)) {
        offered.insert(next_id);
        account(b.offer(record(static_cast<int>(next_id)), now));
        ++next_id;
      } else {
        // ticks advance in steps no coarser than 10ms for the bound above
        now += static_cast<int64_t>(rng.below(10)) + 1;
        account(b.tick(now));
      }
    }
    account(b.flush());
    CHECK(offered == batched);
  }
}
