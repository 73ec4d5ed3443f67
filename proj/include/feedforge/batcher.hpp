// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "feedforge/batch.hpp"
#include "feedforge/errors.hpp"

namespace feedforge {

/// Closes batches by size or age. The age window starts at the first
/// record of the open batch and restarts whenever a batch closes; empty
/// batches are never emitted.
class Batcher {
 public:
  Batcher(std::string feed_id, size_t max_batch_size, int64_t max_batch_age_ms)
      : feed_id_(std::move(feed_id)),
        max_size_(max_batch_size),
        max_age_ms_(max_batch_age_ms) {
    if (max_size_ < 1) raise(Errc::config_error, "max_batch_size must be >= 1");
    if (max_age_ms_ < 1) raise(Errc::config_error, "max_batch_age_ms must be >= 1");
  }

  std::optional<Batch> offer(FeedRecord record, int64_t now_ms) {
    if (record.feed_id != feed_id_)
      raise(Errc::invalid_argument, "record feed '" + record.feed_id +
                                        "' offered to batcher for '" + feed_id_ + "'");
    if (open_.empty()) created_at_ = now_ms;
    last_now_ = now_ms;
    open_.push_back(std::move(record));
    if (open_.size() >= max_size_) return close(CloseReason::size, now_ms);
    return std::nullopt;
  }

  std::optional<Batch> tick(int64_t now_ms) {
    last_now_ = now_ms;
    if (!open_.empty() && now_ms - created_at_ >= max_age_ms_)
      return close(CloseReason::age, now_ms);
    return std::nullopt;
  }

  std::optional<Batch> flush() {
    if (open_.empty()) return std::nullopt;
    return close(CloseReason::shutdown, last_now_);
  }

  size_t pending() const { return open_.size(); }

 private:
  Batch close(CloseReason reason, int64_t closed_at) {
    Batch b;
    b.feed_id = feed_id_;
    b.records = std::move(open_);
    open_.clear();
    b.created_at_ms = created_at_;
    b.closed_at_ms = closed_at;
    b.close_reason = reason;
    b.batch_id = make_batch_id(feed_id_, ++seq_, b.records);
    return b;
  }

  std::string feed_id_;
  size_t max_size_;
  int64_t max_age_ms_;
  std::vector<FeedRecord> open_;
  int64_t created_at_ = 0;
  int64_t last_now_ = 0;
  uint64_t seq_ = 0;
};

}  // namespace feedforge
