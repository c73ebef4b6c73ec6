#pragma once

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace cepless {

/// Linear back-off for polling loops: every empty poll adds one increment
/// to the total sleep, up to a cap; any productive poll resets it to zero.
class LinearBackoff {
 public:
  using duration = std::chrono::nanoseconds;

  LinearBackoff(duration increment, duration cap) : increment_(increment), cap_(cap) {
    if (increment <= duration::zero()) throw std::invalid_argument("backoff increment must be > 0");
    if (cap < increment) throw std::invalid_argument("backoff cap must be >= increment");
  }

  /// Registers an empty poll and returns how long to sleep for it.
  duration next() {
    current_ = std::min(current_ + increment_, cap_);
    return current_;
  }

  void reset() { current_ = duration::zero(); }
  duration current() const { return current_; }
  duration increment() const { return increment_; }
  duration cap() const { return cap_; }

 private:
  duration increment_;
  duration cap_;
  duration current_{0};
};

}  // namespace cepless
