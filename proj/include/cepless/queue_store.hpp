#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cepless/protocol.hpp"

namespace cepless {

inline constexpr std::size_t kMaxPayloadBytes = 1u << 20;
inline constexpr std::size_t kDefaultMaxQueueItems = 10'000'000;

/// Named in-memory FIFO queues. Items are appended at the tail and removed
/// from the head only; nothing expires. All mutations are serialised by one
/// lock, so the observable history is a single global order consistent with
/// each connection's request order.
class QueueStore {
 public:
  explicit QueueStore(std::size_t max_queue_items = kDefaultMaxQueueItems)
      : max_items_(max_queue_items) {}

  QueueStore(const QueueStore&) = delete;
  QueueStore& operator=(const QueueStore&) = delete;

  /// Executes one command (QCREATE, QDELETE, PUSH, RANGE, TRIM, LEN, PING).
  protocol::Reply execute(const protocol::Request& request);
  /// As above; a PUSH payload is moved into the queue.
  protocol::Reply execute(protocol::Request&& request);
  /// Appends the encoded reply to `out`. RANGE is written straight from the
  /// queue without copying the items first.
  void execute_into(protocol::Request&& request, std::string& out);

  // Direct accessors, mostly for tests and in-process tooling.
  std::size_t length(std::string_view queue) const;
  std::vector<std::string> range(std::string_view queue, std::size_t start,
                                 std::size_t count) const;
  std::vector<std::string> queue_names() const;
  std::size_t max_queue_items() const { return max_items_; }

 private:
  struct Queue {
    std::deque<std::string> items;
    std::chrono::system_clock::time_point created_at;
  };

  Queue& get_or_create(const std::string& name);

  std::size_t max_items_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, Queue> queues_;
};

}  // namespace cepless
