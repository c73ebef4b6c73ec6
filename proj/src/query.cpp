#include "cepless/query.hpp"

#include <future>
#include <iostream>
#include <set>
#include <thread>

#include "cepless/registry.hpp"

namespace cepless {

using namespace std::chrono_literals;

QueryGraph& QueryGraph::add(Vertex v) {
  vertices_.push_back(std::move(v));
  return *this;
}

QueryGraph& QueryGraph::source(const std::string& id) {
  return add(Vertex{id, VertexKind::kSource, kDefaultFraudThreshold, "", std::nullopt});
}

QueryGraph& QueryGraph::filter(const std::string& id, double threshold) {
  return add(Vertex{id, VertexKind::kFilter, threshold, "", std::nullopt});
}

QueryGraph& QueryGraph::forward(const std::string& id) {
  return add(Vertex{id, VertexKind::kForward, kDefaultFraudThreshold, "", std::nullopt});
}

QueryGraph& QueryGraph::sink(const std::string& id) {
  return add(Vertex{id, VertexKind::kSink, kDefaultFraudThreshold, "", std::nullopt});
}

QueryGraph& QueryGraph::user_defined(const std::string& id, const std::string& operator_name,
                                     std::optional<std::string> version) {
  return add(Vertex{id, VertexKind::kUserDefined, kDefaultFraudThreshold, operator_name,
                    std::move(version)});
}

QueryGraph& QueryGraph::edge(const std::string& from, const std::string& to) {
  edges_.emplace_back(from, to);
  return *this;
}

std::size_t QueryGraph::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (vertices_[i].id == id) return i;
  }
  throw GraphError("unknown vertex '" + id + "'");
}

std::vector<std::size_t> QueryGraph::topological_order() const {
  const std::size_t n = vertices_.size();
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& [from, to] : edges_) {
    const auto a = index_of(from);
    const auto b = index_of(to);
    out[a].push_back(b);
    ++indegree[b];
  }
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t i = n; i-- > 0;) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    const auto v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (const auto w : out[v]) {
      if (--indegree[w] == 0) ready.push_back(w);
    }
  }
  if (order.size() != n) throw GraphError("operator graph has a cycle");
  return order;
}

void QueryGraph::validate() const {
  std::set<std::string> ids;
  bool has_source = false;
  bool has_sink = false;
  for (const auto& v : vertices_) {
    if (v.id.empty()) throw GraphError("vertex with empty id");
    if (!ids.insert(v.id).second) throw GraphError("duplicate vertex '" + v.id + "'");
    has_source |= v.kind == VertexKind::kSource;
    has_sink |= v.kind == VertexKind::kSink;
    if (v.kind == VertexKind::kUserDefined && !is_valid_operator_name(v.operator_name)) {
      throw GraphError("vertex '" + v.id + "': invalid operator name '" + v.operator_name + "'");
    }
  }
  if (!has_source) throw GraphError("graph has no source");
  if (!has_sink) throw GraphError("graph has no sink");
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [from, to] : edges_) {
    const auto& a = vertices_[index_of(from)];
    const auto& b = vertices_[index_of(to)];
    if (a.kind == VertexKind::kSink) throw GraphError("edge out of sink '" + from + "'");
    if (b.kind == VertexKind::kSource) throw GraphError("edge into source '" + to + "'");
    if (!seen.emplace(from, to).second) {
      throw GraphError("duplicate edge " + from + " -> " + to);
    }
  }
  topological_order();
}

QueryGraph QueryGraph::single_operator(Vertex op) {
  QueryGraph g;
  const std::string id = op.id;
  g.source("source").add(std::move(op)).sink("sink");
  g.edge("source", id).edge(id, "sink");
  return g;
}

QueryRunner::QueryRunner(QueryGraph graph, UdoInterface* udo, ConsumerCallback consumer)
    : graph_(std::move(graph)), udo_(udo), consumer_(std::move(consumer)) {
  graph_.validate();
  const auto& vs = graph_.vertices();
  successors_.resize(vs.size());
  for (const auto& [from, to] : graph_.edges()) {
    successors_[graph_.index_of(from)].push_back(graph_.index_of(to));
  }
  for (const auto v : graph_.topological_order()) {
    if (vs[v].kind == VertexKind::kSource) sources_.push_back(v);
    if (vs[v].kind == VertexKind::kUserDefined) user_defined_.push_back(v);
  }
  if (!user_defined_.empty() && udo_ == nullptr) {
    throw GraphError("graph has serverless operators but no UDO interface");
  }
  addresses_.resize(vs.size());
  listeners_.resize(vs.size());
}

QueryRunner::~QueryRunner() {
  if (!started_) return;
  try {
    stop();
  } catch (const std::exception& e) {
    std::cerr << "cepless: stopping query: " << e.what() << '\n';
  }
}

void QueryRunner::deploy_all() {
  const auto& vs = graph_.vertices();
  std::vector<std::pair<std::size_t, std::future<OperatorAddress>>> pending;
  for (const auto v : user_defined_) {
    auto promise = std::make_shared<std::promise<OperatorAddress>>();
    pending.emplace_back(v, promise->get_future());
    udo_->request_operator(
        vs[v].operator_name, [promise](const OperatorAddress& a) { promise->set_value(a); },
        [promise](std::exception_ptr e) { promise->set_exception(e); }, vs[v].version);
  }
  std::exception_ptr failure;
  for (auto& [v, future] : pending) {
    try {
      const auto address = future.get();
      std::unique_lock lock(address_mutex_);
      addresses_[v] = address;
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) {
    remove_all();
    std::rethrow_exception(failure);
  }
  for (const auto v : user_defined_) {
    const auto listener = udo_->add_listener(*addresses_[v], [this, v](const Event& e) {
      for (const auto next : successors_[v]) route(next, e);
    });
    std::unique_lock lock(address_mutex_);
    listeners_[v] = listener;
  }
}

void QueryRunner::remove_all() {
  // Upstream first, so each removal can still deliver into its successors.
  for (const auto v : user_defined_) {
    std::optional<OperatorAddress> address;
    {
      std::shared_lock lock(address_mutex_);
      address = addresses_[v];
    }
    if (address) udo_->remove_operator(*address);
    std::unique_lock lock(address_mutex_);
    addresses_[v].reset();
    listeners_[v].reset();
  }
}

void QueryRunner::start() {
  if (started_) throw std::logic_error("query already started");
  if (!user_defined_.empty()) deploy_all();
  started_ = true;
}

void QueryRunner::route(std::size_t vertex, const Event& event) {
  const auto& v = graph_.vertices()[vertex];
  switch (v.kind) {
    case VertexKind::kSource:
    case VertexKind::kForward:
      break;
    case VertexKind::kFilter:
      try {
        if (!fraud_predicate(event, v.threshold)) return;
      } catch (const std::invalid_argument&) {
        ++rejected_;
        return;
      }
      break;
    case VertexKind::kSink: {
      const auto received = std::chrono::steady_clock::now();
      std::lock_guard lock(sink_mutex_);
      consumer_(event, received);
      return;
    }
    case VertexKind::kUserDefined: {
      std::shared_lock lock(address_mutex_);
      if (!addresses_[vertex]) throw StaleAddress("vertex '" + v.id + "' is not deployed");
      udo_->send_event(*addresses_[vertex], event);
      return;
    }
  }
  for (const auto next : successors_[vertex]) route(next, event);
}

void QueryRunner::push(const Event& event) {
  std::lock_guard lock(intake_mutex_);
  if (paused_) {
    held_.push_back(event);
    return;
  }
  for (const auto s : sources_) route(s, event);
}

bool QueryRunner::drain(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    bool all = true;
    for (const auto v : user_defined_) {
      std::optional<OperatorAddress> address;
      {
        std::shared_lock lock(address_mutex_);
        address = addresses_[v];
      }
      if (address && !udo_->quiescent(*address)) {
        all = false;
        break;
      }
    }
    if (all) return true;
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(1ms);
  }
}

void QueryRunner::stop() {
  if (!started_) return;
  started_ = false;
  if (!user_defined_.empty()) remove_all();
}

UpdateReport QueryRunner::update(const std::string& vertex_id, const std::string& version) {
  const auto address = this->address(vertex_id);
  if (!address) throw GraphError("vertex '" + vertex_id + "' is not a deployed operator");
  return udo_->update_operator(*address, version);
}

std::chrono::milliseconds QueryRunner::redeploy(
    const std::map<std::string, std::string>& versions) {
  const auto t0 = std::chrono::steady_clock::now();
  {
    std::lock_guard lock(intake_mutex_);
    paused_ = true;
  }
  for (const auto& [id, version] : versions) {
    const auto v = graph_.index_of(id);
    if (graph_.vertices()[v].kind != VertexKind::kUserDefined) {
      throw GraphError("vertex '" + id + "' is not a serverless operator");
    }
  }
  drain(30s);
  remove_all();
  // Rebuild the graph with the requested versions.
  QueryGraph next;
  for (auto v : graph_.vertices()) {
    if (const auto it = versions.find(v.id); it != versions.end()) v.version = it->second;
    switch (v.kind) {
      case VertexKind::kSource: next.source(v.id); break;
      case VertexKind::kFilter: next.filter(v.id, v.threshold); break;
      case VertexKind::kForward: next.forward(v.id); break;
      case VertexKind::kSink: next.sink(v.id); break;
      case VertexKind::kUserDefined: next.user_defined(v.id, v.operator_name, v.version); break;
    }
  }
  for (const auto& [from, to] : graph_.edges()) next.edge(from, to);
  graph_ = std::move(next);
  deploy_all();
  {
    std::lock_guard lock(intake_mutex_);
    for (const auto& e : held_) {
      for (const auto s : sources_) route(s, e);
    }
    held_.clear();
    paused_ = false;
  }
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                t0);
}

std::optional<OperatorAddress> QueryRunner::address(const std::string& vertex_id) const {
  const auto v = graph_.index_of(vertex_id);
  std::shared_lock lock(address_mutex_);
  return addresses_[v];
}

std::vector<ConsumedEvent> run_query(const QueryGraph& graph, UdoInterface* udo,
                                     const std::vector<Event>& events,
                                     std::chrono::milliseconds drain_timeout) {
  std::vector<ConsumedEvent> out;
  QueryRunner runner(graph, udo, [&out](const Event& e, std::chrono::steady_clock::time_point t) {
    out.push_back(ConsumedEvent{e, t});
  });
  runner.start();
  for (const auto& e : events) runner.push(e);
  if (!runner.drain(drain_timeout)) {
    throw std::runtime_error("query did not drain within " +
                             std::to_string(drain_timeout.count()) + " ms");
  }
  runner.stop();
  return out;
}

}  // namespace cepless
