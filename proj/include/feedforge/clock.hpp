// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <thread>

namespace feedforge {

/// Injected time source. Pipeline components never read the system clock
/// directly; tests and the CLI decide whether time is simulated or real.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t now_ms() = 0;
  virtual void advance_ms(int64_t delta_ms) = 0;
};

/// Logical clock. advance_ms is monotonic and safe to call from several
/// threads (consumers waiting out a visibility timeout race benignly).
class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(int64_t start_ms = 0) : now_(start_ms) {}

  int64_t now_ms() override { return now_.load(std::memory_order_relaxed); }

  void advance_ms(int64_t delta_ms) override {
    if (delta_ms > 0) now_.fetch_add(delta_ms, std::memory_order_relaxed);
  }

  /// Move forward to at least `t_ms`; never goes backwards.
  void advance_to(int64_t t_ms) {
    int64_t cur = now_.load(std::memory_order_relaxed);
    while (cur < t_ms &&
           !now_.compare_exchange_weak(cur, t_ms, std::memory_order_relaxed)) {
    }
  }

 private:
  std::atomic<int64_t> now_;
};

class WallClock final : public Clock {
 public:
  int64_t now_ms() override {
    auto d = std::chrono::steady_clock::now().time_since_epoch();
    return std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
  }

  void advance_ms(int64_t delta_ms) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(delta_ms));
  }
};

}  // namespace feedforge
