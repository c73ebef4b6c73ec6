#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cepless/event.hpp"
#include "cepless/frame_server.hpp"
#include "cepless/net.hpp"
#include "cepless/process.hpp"
#include "cepless/registry.hpp"
#include "cepless/transport.hpp"

namespace cepless {

inline constexpr std::uint16_t kDefaultControlPort = 6481;

class NodeManagerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class UnknownInstance : public NodeManagerError {
 public:
  using NodeManagerError::NodeManagerError;
};
class InvalidState : public NodeManagerError {
 public:
  using NodeManagerError::NodeManagerError;
};
/// The worker exited or stayed silent before announcing readiness.
class WorkerFailed : public NodeManagerError {
 public:
  using NodeManagerError::NodeManagerError;
};
/// The replacement worker failed; the previous worker keeps running.
class UpdateFailed : public NodeManagerError {
 public:
  using NodeManagerError::NodeManagerError;
};

enum class OperatorState { kStarting, kRunning, kUpdating, kStopped, kFailed };

std::string_view to_string(OperatorState state);
OperatorState operator_state_from_string(std::string_view text);

struct OperatorHandle {
  explicit OperatorHandle(const std::string& id)
      : instance_id(id), queues(QueuePair::for_instance(id)) {}

  std::string instance_id;
  OperatorDescriptor descriptor;
  QueuePair queues;
  std::string ctl_queue;
  std::string queue_address;
  std::int64_t pid = 0;
  OperatorState state = OperatorState::kStarting;
  std::int64_t started_at = 0;  // epoch microseconds
  std::uint32_t generation = 0;
  std::uint32_t restarts = 0;
  std::string last_error;

  nlohmann::json to_json() const;
  static OperatorHandle from_json(const nlohmann::json& doc);
};

struct UpdateReport {
  std::string instance_id;
  std::string old_version;
  std::string new_version;
  double update_duration_ms = 0;  // request receipt -> replacement ready
  double switch_duration_ms = 0;  // request receipt -> replacement consuming
  double drain_duration_ms = 0;   // drain sent -> old worker acknowledged
  std::uint64_t events_in_flight = 0;  // eq_in length at the hand-over
  std::uint64_t len_before_stop = 0;
  std::uint64_t len_after_start = 0;
  bool forced_kill = false;

  nlohmann::json to_json() const;
  static UpdateReport from_json(const nlohmann::json& doc);
};

/// What a CEP runtime needs from a node manager, local or remote.
class Deployer {
 public:
  virtual ~Deployer() = default;
  virtual OperatorHandle deploy(const std::string& name,
                                const std::optional<std::string>& version = std::nullopt) = 0;
  virtual UpdateReport update(const std::string& instance_id, const std::string& version) = 0;
  virtual void remove(const std::string& instance_id) = 0;
  virtual OperatorHandle status(const std::string& instance_id) = 0;
  virtual std::vector<OperatorHandle> list() = 0;
};

/// Tracks which worker generation may consume (and so TRIM) each input
/// queue. Acquiring a held token is a bug in the hand-over and is counted.
class ConsumerTokens {
 public:
  void acquire(const std::string& queue, const std::string& holder);
  void release(const std::string& queue, const std::string& holder);
  std::optional<std::string> holder(const std::string& queue) const;
  std::uint64_t violations() const { return violations_; }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::string> holders_;
  std::atomic<std::uint64_t> violations_{0};
};

struct NodeManagerConfig {
  net::Address queue_address;
  std::size_t batch_size = 1000;
  std::chrono::nanoseconds backoff_increment = std::chrono::microseconds(100);
  std::chrono::milliseconds liveness_timeout = std::chrono::seconds(10);
  std::chrono::milliseconds drain_timeout = std::chrono::seconds(5);
  std::chrono::milliseconds supervise_interval = std::chrono::milliseconds(50);
  int max_crashes = 3;
  std::chrono::milliseconds crash_window = std::chrono::seconds(10);
};

/// NM_n: deploys operator workers, hands each a queue pair, supervises them
/// and swaps them without touching the queues.
///
/// Operations on one instance are serialised by that instance's mutex and
/// run in parallel across instances. The supervisor skips instances that
/// are busy with an operation.
class NodeManager final : public Deployer {
 public:
  NodeManager(NodeManagerConfig config, std::shared_ptr<Registry> registry,
              std::shared_ptr<ProcessBackend> backend);
  ~NodeManager() override;

  NodeManager(const NodeManager&) = delete;
  NodeManager& operator=(const NodeManager&) = delete;

  OperatorHandle deploy(const std::string& name,
                        const std::optional<std::string>& version = std::nullopt) override;
  UpdateReport update(const std::string& instance_id, const std::string& version) override;
  void remove(const std::string& instance_id) override;
  OperatorHandle status(const std::string& instance_id) override;
  std::vector<OperatorHandle> list() override;

  void start_supervisor();
  void stop_supervisor();
  /// Runs one supervision pass; returns the number of restarts performed.
  std::size_t supervise_once();

  /// Stops every worker (queues are left in place).
  void shutdown();

  const ConsumerTokens& tokens() const { return tokens_; }
  const NodeManagerConfig& config() const { return config_; }

 private:
  struct Instance;
  enum class Wait { kSeen, kExited, kTimeout };

  std::shared_ptr<Instance> find(const std::string& instance_id);
  std::string new_instance_id(const std::string& name);
  std::unique_ptr<ProcessHandle> spawn(const FetchedOperator& op, const OperatorHandle& handle,
                                       const std::string& ctl_queue, bool paused);
  Wait wait_for_control(QueueConnection& conn, const std::string& ctl_queue,
                        std::string_view message, ProcessHandle& process,
                        std::chrono::milliseconds timeout);
  bool stop_worker(QueueConnection& conn, Instance& inst, const std::string& ctl_queue);
  void set_handle(Instance& inst, const OperatorHandle& handle);
  bool restart_crashed(Instance& inst);
  void supervisor_loop();

  NodeManagerConfig config_;
  std::shared_ptr<Registry> registry_;
  std::shared_ptr<ProcessBackend> backend_;
  TransportFactory queue_factory_;
  ConsumerTokens tokens_;

  std::mutex state_mutex_;
  std::map<std::string, std::shared_ptr<Instance>> instances_;

  std::mutex supervisor_mutex_;
  std::condition_variable supervisor_cv_;
  bool supervisor_stop_ = false;
  std::thread supervisor_;
};

/// Serves a Deployer over the frame protocol:
///   DEPLOY <name> [version] | UPDATE <id> <version> | REMOVE <id> |
///   STATUS [id] | PING
/// Successful replies are a one-element array holding a canonical document;
/// failures are "-ERR <kind>: <message>".
class ControlServer {
 public:
  explicit ControlServer(Deployer& deployer);
  ~ControlServer();

  void start(const net::Address& bind_address);
  void serve(const net::Address& bind_address);
  void stop();
  std::uint16_t port() const { return server_.port(); }

  protocol::Reply handle(const protocol::Request& request);

 private:
  Deployer& deployer_;
  FrameServer server_;
};

/// Deployer backed by a ControlServer on another process or host.
class RemoteNodeManager final : public Deployer {
 public:
  explicit RemoteNodeManager(net::Address address,
                             std::chrono::milliseconds timeout = std::chrono::seconds(60));

  OperatorHandle deploy(const std::string& name,
                        const std::optional<std::string>& version = std::nullopt) override;
  UpdateReport update(const std::string& instance_id, const std::string& version) override;
  void remove(const std::string& instance_id) override;
  OperatorHandle status(const std::string& instance_id) override;
  std::vector<OperatorHandle> list() override;
  void ping();

 private:
  nlohmann::json call(protocol::Request request);

  net::Address address_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  std::unique_ptr<Transport> transport_;
};

}  // namespace cepless
