#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

namespace cepless {

/// Time source for polling loops, injectable so tests can observe sleeps.
class Clock {
 public:
  using duration = std::chrono::nanoseconds;
  using time_point = std::chrono::steady_clock::time_point;

  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(duration d) = 0;
};

/// Real clock. Requests shorter than `min_sleep` are below what the timer
/// can honour and become a yield instead.
class SystemClock final : public Clock {
 public:
  explicit SystemClock(duration min_sleep = std::chrono::microseconds(50))
      : min_sleep_(min_sleep) {}

  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(duration d) override;

 private:
  duration min_sleep_;
};

std::shared_ptr<Clock> system_clock();

/// Virtual clock: sleep_for advances time instantly and records the request.
/// The optional hook runs after each recorded sleep with its 1-based index.
class FakeClock final : public Clock {
 public:
  time_point now() override;
  void sleep_for(duration d) override;

  std::vector<duration> sleeps() const;
  void set_on_sleep(std::function<void(std::size_t)> hook);
  void advance(duration d);

 private:
  mutable std::mutex mutex_;
  time_point now_{};
  std::vector<duration> sleeps_;
  std::function<void(std::size_t)> hook_;
};

}  // namespace cepless
