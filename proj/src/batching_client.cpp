#include "cepless/batching_client.hpp"

#include <pthread.h>

#include <condition_variable>
#include <iostream>

namespace cepless {

void BatchingConfig::validate() const {
  if (out_batch_size < 1) throw std::invalid_argument("out_batch_size must be >= 1");
  if (in_batch_size < 1) throw std::invalid_argument("in_batch_size must be >= 1");
  if (backoff_increment <= std::chrono::nanoseconds::zero()) {
    throw std::invalid_argument("backoff_increment must be > 0");
  }
  if (backoff_cap < backoff_increment) {
    throw std::invalid_argument("backoff_cap must be >= backoff_increment");
  }
  if (send_buffer_limit < 1) throw std::invalid_argument("send_buffer_limit must be >= 1");
}

namespace {

BatchingConfig validated(BatchingConfig config) {
  config.validate();
  return config;
}

}  // namespace

BatchingClient::BatchingClient(BatchingConfig config, TransportFactory transport_factory,
                               Endpoints endpoints, EventsCallback on_events,
                               std::shared_ptr<Clock> clock)
    : config_(validated(config)),
      transport_factory_(std::move(transport_factory)),
      endpoints_(std::move(endpoints)),
      on_events_(std::move(on_events)),
      clock_(std::move(clock)),
      send_backoff_(config_.backoff_increment, config_.backoff_cap),
      receive_backoff_(config_.backoff_increment, config_.backoff_cap) {
  if (!endpoints_.receive_queue.empty() && !on_events_) {
    throw std::invalid_argument("a receive queue needs an events callback");
  }
}

BatchingClient::~BatchingClient() {
  if (!stopped_) {
    try {
      stop(std::chrono::seconds(1));
    } catch (const std::exception& e) {
      std::cerr << "cepless: client teardown: " << e.what() << '\n';
    }
  }
}

void BatchingClient::start() {
  if (started_.exchange(true)) throw std::logic_error("client already started");
  if (stopped_) throw ClientStopped("client is stopped");
  if (!endpoints_.send_queue.empty()) {
    send_thread_ = std::thread([this] {
      pthread_setname_np(pthread_self(), "udo-send");
      send_worker();
    });
  } else {
    send_done_ = true;
  }
  if (!endpoints_.receive_queue.empty()) {
    receive_thread_ = std::thread([this] {
      pthread_setname_np(pthread_self(), "udo-receive");
      receive_worker();
    });
  }
}

void BatchingClient::receive_event(const Event& event) {
  if (stopping_) throw ClientStopped("client is stopped");
  if (endpoints_.send_queue.empty()) throw std::logic_error("client has no send queue");
  std::string payload = encode_event(event);
  std::lock_guard lock(buffer_mutex_);
  if (buffer_.size() >= config_.send_buffer_limit) {
    throw BackpressureError("send buffer full (" + std::to_string(buffer_.size()) +
                            " events)");
  }
  buffer_.push_back(std::move(payload));
  high_water_ = std::max(high_water_, buffer_.size());
}

Transport& BatchingClient::send_transport() {
  if (!send_transport_) send_transport_ = transport_factory_();
  return *send_transport_;
}

Transport& BatchingClient::receive_transport() {
  if (!receive_transport_) receive_transport_ = transport_factory_();
  return *receive_transport_;
}

bool BatchingClient::flush_batch() {
  if (inflight_.empty()) {
    std::lock_guard lock(buffer_mutex_);
    if (buffer_.empty()) return false;
    // pop(0, outBatchSize), or the whole buffer when it is smaller.
    const std::size_t n = std::min(buffer_.size(), config_.out_batch_size);
    for (std::size_t i = 0; i < n; ++i) {
      inflight_.push_back(std::move(buffer_.front()));
      buffer_.pop_front();
    }
  }

  std::vector<PushCommand> commands;
  commands.reserve(inflight_.size());
  for (const auto& payload : inflight_) commands.push_back({endpoints_.send_queue, payload});
  const auto replies = send_transport().push(commands);
  flushes_.fetch_add(1, std::memory_order_relaxed);

  // Drop the acknowledged prefix; anything after a rejection is retried.
  std::size_t acked = 0;
  while (acked < replies.size() && !replies[acked].is_error()) ++acked;
  bool rejected = false;
  {
    std::lock_guard lock(buffer_mutex_);
    inflight_.erase(inflight_.begin(), inflight_.begin() + static_cast<std::ptrdiff_t>(acked));
    rejected = !inflight_.empty();
  }
  events_flushed_.fetch_add(acked, std::memory_order_relaxed);
  if (rejected) throw TransportError("PUSH rejected: " + replies[acked].error);
  return true;
}

bool BatchingClient::poll_send() {
  try {
    if (flush_batch()) {
      send_backoff_.reset();
      return true;
    }
  } catch (const TransportError&) {
    transport_errors_.fetch_add(1, std::memory_order_relaxed);
    // Reconnect on the next attempt; the unflushed batch stays in inflight_.
    send_transport_.reset();
  }
  clock_->sleep_for(send_backoff_.next());
  return false;
}

void BatchingClient::commit_pending_trim() {
  if (pending_trim_ == 0) return;
  const protocol::Request trim[] = {
      {"TRIM", endpoints_.receive_queue, std::to_string(pending_trim_)}};
  const auto replies = receive_transport().exchange(trim);
  if (replies.at(0).is_error()) throw TransportError("TRIM: " + replies[0].error);
  pending_trim_ = 0;
}

bool BatchingClient::poll_receive() {
  std::vector<std::string> items;
  try {
    std::vector<protocol::Request> commands;
    const bool trimming = pending_trim_ > 0;
    if (trimming) {
      commands.push_back({"TRIM", endpoints_.receive_queue, std::to_string(pending_trim_)});
    }
    commands.push_back(
        {"RANGE", endpoints_.receive_queue, "0", std::to_string(config_.in_batch_size)});
    auto replies = receive_transport().exchange(commands);
    range_round_trips_.fetch_add(1, std::memory_order_relaxed);
    if (trimming) {
      if (replies.front().is_error()) throw TransportError("TRIM: " + replies.front().error);
      pending_trim_ = 0;
    }
    auto& range = replies.back();
    if (range.is_error()) throw TransportError("RANGE: " + range.error);
    items = std::move(range.items);
  } catch (const TransportError&) {
    transport_errors_.fetch_add(1, std::memory_order_relaxed);
    receive_transport_.reset();
    clock_->sleep_for(receive_backoff_.next());
    return false;
  }

  if (items.empty()) {
    receive_idle_ = true;
    clock_->sleep_for(receive_backoff_.next());
    return false;
  }
  receive_idle_ = false;

  std::vector<Event> events;
  events.reserve(items.size());
  for (const auto& item : items) {
    try {
      events.push_back(decode_event(item));
    } catch (const DecodingError& e) {
      decode_failures_.fetch_add(1, std::memory_order_relaxed);
      std::cerr << "cepless: dropping undecodable payload: " << e.what() << '\n';
    }
  }

  try {
    if (!events.empty()) on_events_(events);
  } catch (const std::exception& e) {
    callback_failures_.fetch_add(1, std::memory_order_relaxed);
    std::cerr << "cepless: events callback failed, batch will be redelivered: " << e.what()
              << '\n';
    clock_->sleep_for(receive_backoff_.next());
    return false;
  }
  pending_trim_ = items.size();
  events_delivered_.fetch_add(events.size(), std::memory_order_relaxed);
  receive_backoff_.reset();
  return true;
}

void BatchingClient::send_worker() {
  while (!abort_) {
    if (poll_send()) continue;
    if (stopping_ && inflight_.empty()) {
      std::lock_guard lock(buffer_mutex_);
      if (buffer_.empty()) break;
    }
  }
  {
    std::lock_guard lock(done_mutex_);
    send_done_ = true;
  }
  done_cv_.notify_all();
}

void BatchingClient::receive_worker() {
  while (!stopping_ && !abort_) poll_receive();
  try {
    commit_pending_trim();
  } catch (const TransportError& e) {
    std::cerr << "cepless: final TRIM failed: " << e.what() << '\n';
  }
}

void BatchingClient::stop(std::chrono::milliseconds timeout) {
  if (stopped_.exchange(true)) throw std::logic_error("client already stopped");
  stopping_ = true;

  if (!started_) {
    // Synchronous drain for a client that never spawned workers.
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    if (!endpoints_.send_queue.empty()) {
      while (pending() > 0) {
        if (std::chrono::steady_clock::now() >= deadline) throw ShutdownTimeout(pending());
        poll_send();
      }
    }
    if (!endpoints_.receive_queue.empty()) {
      try {
        commit_pending_trim();
      } catch (const TransportError&) {
      }
    }
    return;
  }

  bool drained = true;
  {
    std::unique_lock lock(done_mutex_);
    drained = done_cv_.wait_for(lock, timeout, [this] { return send_done_.load(); });
  }
  std::size_t unflushed = 0;
  if (!drained) {
    abort_ = true;
  }
  if (send_thread_.joinable()) send_thread_.join();
  if (receive_thread_.joinable()) receive_thread_.join();
  if (!drained) {
    unflushed = pending();
    throw ShutdownTimeout(unflushed);
  }
}

std::size_t BatchingClient::pending() const {
  std::lock_guard lock(buffer_mutex_);
  return buffer_.size() + inflight_.size();
}

std::size_t BatchingClient::high_water() const {
  std::lock_guard lock(buffer_mutex_);
  return high_water_;
}

BatchingClient::Stats BatchingClient::stats() const {
  Stats s;
  s.flushes = flushes_.load();
  s.events_flushed = events_flushed_.load();
  s.range_round_trips = range_round_trips_.load();
  s.events_delivered = events_delivered_.load();
  s.callback_failures = callback_failures_.load();
  s.decode_failures = decode_failures_.load();
  s.transport_errors = transport_errors_.load();
  return s;
}

}  // namespace cepless
