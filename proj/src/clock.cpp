#include "cepless/clock.hpp"

#include <thread>

namespace cepless {

void SystemClock::sleep_for(duration d) {
  if (d < min_sleep_) {
    std::this_thread::yield();
    return;
  }
  std::this_thread::sleep_for(d);
}

std::shared_ptr<Clock> system_clock() {
  static const std::shared_ptr<Clock> clock = std::make_shared<SystemClock>();
  return clock;
}

FakeClock::time_point FakeClock::now() {
  std::lock_guard lock(mutex_);
  return now_;
}

void FakeClock::sleep_for(duration d) {
  std::function<void(std::size_t)> hook;
  std::size_t index = 0;
  {
    std::lock_guard lock(mutex_);
    now_ += d;
    sleeps_.push_back(d);
    index = sleeps_.size();
    hook = hook_;
  }
  if (hook) hook(index);
}

std::vector<FakeClock::duration> FakeClock::sleeps() const {
  std::lock_guard lock(mutex_);
  return sleeps_;
}

void FakeClock::set_on_sleep(std::function<void(std::size_t)> hook) {
  std::lock_guard lock(mutex_);
  hook_ = std::move(hook);
}

void FakeClock::advance(duration d) {
  std::lock_guard lock(mutex_);
  now_ += d;
}

}  // namespace cepless
