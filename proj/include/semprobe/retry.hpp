// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>

#include "semprobe/error.hpp"

namespace semprobe {

/// Backend-unavailable failures are retried with exponential backoff
/// (1 s, 2 s, 4 s by default). Every other error propagates immediately.
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{1000};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };

  static RetryPolicy none() { return RetryPolicy{0, std::chrono::milliseconds{0}, {}}; }
};

template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  auto delay = policy.base_delay;
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= policy.max_retries) throw;
    }
    if (policy.sleep) policy.sleep(delay);
    delay *= 2;
  }
}

/// Caps concurrent calls into a backend. A limit of 0 means unlimited.
class InFlightGate {
 public:
  explicit InFlightGate(std::size_t limit = 0) : limit_(limit) {}

  class Pass {
   public:
    explicit Pass(InFlightGate* gate) : gate_(gate) {}
    Pass(Pass&& other) noexcept : gate_(std::exchange(other.gate_, nullptr)) {}
    Pass(const Pass&) = delete;
    Pass& operator=(const Pass&) = delete;
    Pass& operator=(Pass&&) = delete;
    ~Pass() {
      if (gate_) gate_->release();
    }

   private:
    InFlightGate* gate_;
  };

  Pass acquire() {
    if (limit_ == 0) return Pass(nullptr);
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    return Pass(this);
  }

  std::size_t limit() const noexcept { return limit_; }

 private:
  void release() {
    {
      std::lock_guard lock(mutex_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  std::size_t limit_;
  std::size_t in_flight_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

}  // namespace semprobe
