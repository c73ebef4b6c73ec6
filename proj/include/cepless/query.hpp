#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "cepless/event.hpp"
#include "cepless/operators.hpp"
#include "cepless/udo.hpp"

namespace cepless {

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class VertexKind { kSource, kFilter, kForward, kSink, kUserDefined };

struct Vertex {
  std::string id;
  VertexKind kind = VertexKind::kForward;
  double threshold = kDefaultFraudThreshold;  // kFilter
  std::string operator_name;                  // kUserDefined
  std::optional<std::string> version;         // kUserDefined
};

/// Producers, built-in operators, serverless operators and consumers wired
/// as a DAG.
class QueryGraph {
 public:
  QueryGraph& source(const std::string& id);
  QueryGraph& filter(const std::string& id, double threshold);
  QueryGraph& forward(const std::string& id);
  QueryGraph& sink(const std::string& id);
  QueryGraph& user_defined(const std::string& id, const std::string& operator_name,
                           std::optional<std::string> version = std::nullopt);
  QueryGraph& edge(const std::string& from, const std::string& to);

  /// Throws GraphError: duplicate or dangling ids, cycles, edges into a
  /// source or out of a sink, missing source or sink, bad operator names.
  void validate() const;
  /// Vertex indices in a topological order. Throws GraphError on a cycle.
  std::vector<std::size_t> topological_order() const;

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
  /// Throws GraphError for an unknown id.
  std::size_t index_of(const std::string& id) const;

  /// source -> op -> sink, with op either serverless or built in.
  static QueryGraph single_operator(Vertex op);

 private:
  QueryGraph& add(Vertex v);

  std::vector<Vertex> vertices_;
  std::vector<std::pair<std::string, std::string>> edges_;
};

using ConsumerCallback =
    std::function<void(const Event&, std::chrono::steady_clock::time_point received)>;

struct ConsumedEvent {
  Event event;
  std::chrono::steady_clock::time_point received;
};

/// Embedded CEP runtime. Built-in vertices run in-process on the calling
/// thread; serverless vertices go through the UDO interface and their
/// successors run on that operator's listener thread.
class QueryRunner {
 public:
  /// `udo` may be null when the graph has no serverless vertex.
  QueryRunner(QueryGraph graph, UdoInterface* udo, ConsumerCallback consumer);
  ~QueryRunner();

  QueryRunner(const QueryRunner&) = delete;
  QueryRunner& operator=(const QueryRunner&) = delete;

  /// Deploys the serverless vertices. Throws GraphError, DeploymentError.
  void start();
  /// Feeds an event to every source.
  void push(const Event& event);
  /// Waits until every serverless vertex is quiescent.
  bool drain(std::chrono::milliseconds timeout);
  /// Removes the serverless operators.
  void stop();

  /// Hot update of one serverless vertex through the node manager.
  UpdateReport update(const std::string& vertex_id, const std::string& version);

  /// The restart a runtime without hot updates has to do: pause intake,
  /// drain, remove every serverless operator, deploy it again (with the
  /// given per-vertex versions), then replay what arrived meanwhile.
  std::chrono::milliseconds redeploy(const std::map<std::string, std::string>& versions);

  std::optional<OperatorAddress> address(const std::string& vertex_id) const;
  std::uint64_t rejected() const { return rejected_; }

 private:
  void route(std::size_t vertex, const Event& event);
  void deploy_all();
  void remove_all();

  QueryGraph graph_;
  UdoInterface* udo_;
  ConsumerCallback consumer_;
  std::vector<std::vector<std::size_t>> successors_;
  std::vector<std::size_t> sources_;
  std::vector<std::size_t> user_defined_;  // topological order

  mutable std::shared_mutex address_mutex_;
  std::vector<std::optional<OperatorAddress>> addresses_;
  std::vector<std::optional<Listener>> listeners_;

  std::mutex intake_mutex_;
  bool paused_ = false;
  std::vector<Event> held_;

  std::mutex sink_mutex_;
  std::atomic<std::uint64_t> rejected_{0};
  bool started_ = false;
};

/// Runs `events` through `graph` to completion and returns what reached
/// the sinks, in arrival order.
std::vector<ConsumedEvent> run_query(const QueryGraph& graph, UdoInterface* udo,
                                     const std::vector<Event>& events,
                                     std::chrono::milliseconds drain_timeout =
                                         std::chrono::seconds(30));

}  // namespace cepless
