#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cepless/backoff.hpp"
#include "cepless/clock.hpp"
#include "cepless/event.hpp"
#include "cepless/transport.hpp"

namespace cepless {

struct BatchingConfig {
  std::size_t out_batch_size = 1000;  // events per PUSH flush
  std::size_t in_batch_size = 1000;   // events per RANGE
  std::chrono::nanoseconds backoff_increment = std::chrono::microseconds(100);
  std::chrono::nanoseconds backoff_cap = std::chrono::milliseconds(10);
  std::size_t send_buffer_limit = 1'000'000;

  /// Throws std::invalid_argument when a bound is violated.
  void validate() const;
};

class BackpressureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClientStopped : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ShutdownTimeout : public std::runtime_error {
 public:
  explicit ShutdownTimeout(std::size_t unflushed)
      : std::runtime_error("shutdown timed out with " + std::to_string(unflushed) +
                           " unflushed events"),
        unflushed_(unflushed) {}
  std::size_t unflushed() const noexcept { return unflushed_; }

 private:
  std::size_t unflushed_;
};

/// Receives one batch in FIFO order. Throwing makes the client deliver the
/// same events again on a later poll.
using EventsCallback = std::function<void(const std::vector<Event>&)>;

/// Host-side queue client: buffers events from the caller and flushes them
/// to the operator's input queue in pipelined batches from a background
/// thread, and polls the output queue with ranged reads from a second one.
/// Both loops back off linearly while idle.
///
/// Consumption of the output queue is RANGE then a deferred TRIM carried in
/// the next poll's flush, so a batch leaves the queue only after the
/// callback accepted it (at-least-once into the callback). This relies on
/// the client being the only consumer of that queue.
class BatchingClient {
 public:
  struct Endpoints {
    std::string send_queue;     // empty: no send worker
    std::string receive_queue;  // empty: no receive worker
  };

  struct Stats {
    std::uint64_t flushes = 0;
    std::uint64_t events_flushed = 0;
    std::uint64_t range_round_trips = 0;
    std::uint64_t events_delivered = 0;
    std::uint64_t callback_failures = 0;
    std::uint64_t decode_failures = 0;
    std::uint64_t transport_errors = 0;
  };

  BatchingClient(BatchingConfig config, TransportFactory transport_factory,
                 Endpoints endpoints, EventsCallback on_events = {},
                 std::shared_ptr<Clock> clock = system_clock());
  ~BatchingClient();

  BatchingClient(const BatchingClient&) = delete;
  BatchingClient& operator=(const BatchingClient&) = delete;

  /// Spawns the background workers for the configured endpoints.
  void start();

  /// Appends to the send buffer without any network I/O. Throws
  /// BackpressureError above the buffer limit, ClientStopped after stop(),
  /// EncodingError for events that cannot be encoded.
  void receive_event(const Event& event);

  /// One iteration of the send loop: flush up to out_batch_size events, or
  /// sleep for the next back-off step when there is nothing to send.
  /// Returns true when a batch was flushed.
  bool poll_send();

  /// One iteration of the receive loop. Returns true when a non-empty batch
  /// was handed to the callback.
  bool poll_receive();

  /// Flushes the send buffer, commits outstanding reads and joins workers.
  /// A second call throws std::logic_error.
  void stop(std::chrono::milliseconds timeout = std::chrono::seconds(5));

  std::size_t pending() const;
  std::size_t high_water() const;
  /// True when the last receive poll came back empty and nothing awaits TRIM.
  bool receive_idle() const { return receive_idle_; }
  Stats stats() const;
  const BatchingConfig& config() const { return config_; }

 private:
  bool flush_batch();
  Transport& send_transport();
  Transport& receive_transport();
  void commit_pending_trim();
  void send_worker();
  void receive_worker();

  BatchingConfig config_;
  TransportFactory transport_factory_;
  Endpoints endpoints_;
  EventsCallback on_events_;
  std::shared_ptr<Clock> clock_;

  mutable std::mutex buffer_mutex_;
  std::deque<std::string> buffer_;
  std::size_t high_water_ = 0;

  // Written by the send worker (or the poll_send caller when not started)
  // under buffer_mutex_.
  std::deque<std::string> inflight_;
  std::unique_ptr<Transport> send_transport_;
  LinearBackoff send_backoff_;

  // Owned by the receive worker.
  std::unique_ptr<Transport> receive_transport_;
  LinearBackoff receive_backoff_;
  std::size_t pending_trim_ = 0;
  std::atomic<bool> receive_idle_{true};

  std::atomic<bool> started_{false};
  std::atomic<bool> stopping_{false};
  std::atomic<bool> stopped_{false};
  std::atomic<bool> abort_{false};
  std::atomic<bool> send_done_{false};
  std::mutex done_mutex_;
  std::condition_variable done_cv_;
  std::thread send_thread_;
  std::thread receive_thread_;

  std::atomic<std::uint64_t> flushes_{0};
  std::atomic<std::uint64_t> events_flushed_{0};
  std::atomic<std::uint64_t> range_round_trips_{0};
  std::atomic<std::uint64_t> events_delivered_{0};
  std::atomic<std::uint64_t> callback_failures_{0};
  std::atomic<std::uint64_t> decode_failures_{0};
  std::atomic<std::uint64_t> transport_errors_{0};
};

}  // namespace cepless
