#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cepless/batching_client.hpp"
#include "cepless/event.hpp"
#include "cepless/net.hpp"
#include "cepless/node_manager.hpp"

namespace cepless {

struct OperatorAddress {
  std::string instance_id;
  QueuePair queues;
  net::Address queue_server;
};

class DeploymentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The address does not (or no longer) name a live operator.
class StaleAddress : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ListenerError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Listener {
  std::uint64_t id = 0;
  std::string instance_id;
};

using ReadyCallback = std::function<void(const OperatorAddress&)>;
using DeployErrorCallback = std::function<void(std::exception_ptr)>;
using EventListener = std::function<void(const Event&)>;

struct UdoConfig {
  BatchingConfig batching;
  std::chrono::milliseconds deploy_timeout = std::chrono::seconds(30);
  /// How long remove_operator waits for queued events to reach listeners.
  std::chrono::milliseconds remove_drain_timeout = std::chrono::seconds(10);
  /// Overrides the TCP transport, e.g. for an in-process queue store.
  std::function<TransportFactory(const net::Address&)> transport_for;
};

/// The host side of the platform: what a CEP runtime calls to use
/// serverless operators.
///
/// request_operator deploys asynchronously and reports on a dispatch thread
/// owned by the interface. Each operator gets one sending client and, once a
/// listener is attached, one receiving client whose thread is the only one
/// invoking that operator's listeners. Events that reach the output queue
/// while an operator has no listener wait there until the first one is
/// added; after the last listener is removed they are dropped.
class UdoInterface {
 public:
  UdoInterface(std::shared_ptr<Deployer> deployer, UdoConfig config = {});
  ~UdoInterface();

  UdoInterface(const UdoInterface&) = delete;
  UdoInterface& operator=(const UdoInterface&) = delete;

  /// Returns a request id. Exactly one of on_ready / on_error runs.
  std::uint64_t request_operator(const std::string& operator_name, ReadyCallback on_ready,
                                 DeployErrorCallback on_error = {},
                                 std::optional<std::string> version = std::nullopt);

  /// Blocking convenience over request_operator. Throws DeploymentError.
  OperatorAddress await_operator(const std::string& operator_name,
                                 std::optional<std::string> version = std::nullopt);

  void send_event(const OperatorAddress& address, const Event& event);

  Listener add_listener(const OperatorAddress& address, EventListener on_event);
  void remove_listener(const Listener& listener);

  /// Delivers what is already queued for the operator, then has the node
  /// manager stop it and delete its queues.
  void remove_operator(const OperatorAddress& address);

  /// Hot swap through the node manager; the address stays valid.
  UpdateReport update_operator(const OperatorAddress& address, const std::string& version);

  /// True when nothing sent to the operator is still buffered, queued or
  /// awaiting delivery to listeners.
  bool quiescent(const OperatorAddress& address);

  std::uint64_t listener_failures() const { return listener_failures_; }

 private:
  struct Operator;

  std::shared_ptr<Operator> find(const std::string& instance_id) const;
  void register_operator(const OperatorHandle& handle, const OperatorAddress& address);
  void dispatch(Operator& op, const std::vector<Event>& events);
  TransportFactory factory_for(const net::Address& address) const;

  std::shared_ptr<Deployer> deployer_;
  UdoConfig config_;

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Operator>> operators_;
  std::vector<std::thread> requests_;
  std::uint64_t next_request_ = 1;
  std::atomic<std::uint64_t> next_listener_{1};
  std::atomic<std::uint64_t> listener_failures_{0};
};

}  // namespace cepless
