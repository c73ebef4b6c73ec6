#include "cepless/node_manager.hpp"

#include <algorithm>
#include <iostream>
#include <random>

#include "cepless/canonical.hpp"
#include "cepless/worker.hpp"

namespace cepless {

using SteadyClock = std::chrono::steady_clock;

namespace {

std::int64_t epoch_micros() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

double ms_between(SteadyClock::time_point a, SteadyClock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

std::string holder_name(const std::string& instance_id, std::uint32_t generation) {
  return instance_id + "#g" + std::to_string(generation);
}

std::string exit_detail(ProcessHandle& process) {
  std::string detail = "worker exited";
  if (const auto status = process.exit_status()) {
    detail += " with status " + std::to_string(*status);
  }
  const auto tail = process.stderr_tail();
  if (!tail.empty()) detail += ": " + tail;
  return detail;
}

}  // namespace

std::string_view to_string(OperatorState state) {
  switch (state) {
    case OperatorState::kStarting:
      return "Starting";
    case OperatorState::kRunning:
      return "Running";
    case OperatorState::kUpdating:
      return "Updating";
    case OperatorState::kStopped:
      return "Stopped";
    case OperatorState::kFailed:
      return "Failed";
  }
  return "Failed";
}

OperatorState operator_state_from_string(std::string_view text) {
  for (auto s : {OperatorState::kStarting, OperatorState::kRunning, OperatorState::kUpdating,
                 OperatorState::kStopped, OperatorState::kFailed}) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown operator state '" + std::string(text) + "'");
}

nlohmann::json OperatorHandle::to_json() const {
  return {{"instance_id", instance_id},
          {"descriptor", descriptor.to_json()},
          {"in_queue", queues.input.str()},
          {"out_queue", queues.output.str()},
          {"ctl_queue", ctl_queue},
          {"queue_address", queue_address},
          {"pid", pid},
          {"state", std::string(to_string(state))},
          {"started_at", started_at},
          {"generation", generation},
          {"restarts", restarts},
          {"last_error", last_error}};
}

OperatorHandle OperatorHandle::from_json(const nlohmann::json& doc) {
  OperatorHandle h(doc.at("instance_id").get<std::string>());
  h.descriptor = OperatorDescriptor::from_json(doc.at("descriptor"));
  h.ctl_queue = doc.at("ctl_queue").get<std::string>();
  h.queue_address = doc.at("queue_address").get<std::string>();
  h.pid = doc.at("pid").get<std::int64_t>();
  h.state = operator_state_from_string(doc.at("state").get<std::string>());
  h.started_at = doc.at("started_at").get<std::int64_t>();
  h.generation = doc.at("generation").get<std::uint32_t>();
  h.restarts = doc.at("restarts").get<std::uint32_t>();
  h.last_error = doc.at("last_error").get<std::string>();
  return h;
}

nlohmann::json UpdateReport::to_json() const {
  return {{"instance_id", instance_id},
          {"old_version", old_version},
          {"new_version", new_version},
          {"update_duration_ms", update_duration_ms},
          {"switch_duration_ms", switch_duration_ms},
          {"drain_duration_ms", drain_duration_ms},
          {"events_in_flight", events_in_flight},
          {"len_before_stop", len_before_stop},
          {"len_after_start", len_after_start},
          {"forced_kill", forced_kill}};
}

UpdateReport UpdateReport::from_json(const nlohmann::json& doc) {
  UpdateReport r;
  r.instance_id = doc.at("instance_id").get<std::string>();
  r.old_version = doc.at("old_version").get<std::string>();
  r.new_version = doc.at("new_version").get<std::string>();
  r.update_duration_ms = doc.at("update_duration_ms").get<double>();
  r.switch_duration_ms = doc.at("switch_duration_ms").get<double>();
  r.drain_duration_ms = doc.at("drain_duration_ms").get<double>();
  r.events_in_flight = doc.at("events_in_flight").get<std::uint64_t>();
  r.len_before_stop = doc.at("len_before_stop").get<std::uint64_t>();
  r.len_after_start = doc.at("len_after_start").get<std::uint64_t>();
  r.forced_kill = doc.at("forced_kill").get<bool>();
  return r;
}

void ConsumerTokens::acquire(const std::string& queue, const std::string& holder) {
  std::lock_guard lock(mutex_);
  const auto it = holders_.find(queue);
  if (it != holders_.end() && it->second != holder) {
    violations_.fetch_add(1);
    throw std::logic_error("consumer token for " + queue + " is held by " + it->second +
                           ", requested by " + holder);
  }
  holders_[queue] = holder;
}

void ConsumerTokens::release(const std::string& queue, const std::string& holder) {
  std::lock_guard lock(mutex_);
  const auto it = holders_.find(queue);
  if (it == holders_.end()) return;
  if (it->second != holder) {
    violations_.fetch_add(1);
    throw std::logic_error("consumer token for " + queue + " is held by " + it->second +
                           ", released by " + holder);
  }
  holders_.erase(it);
}

std::optional<std::string> ConsumerTokens::holder(const std::string& queue) const {
  std::lock_guard lock(mutex_);
  const auto it = holders_.find(queue);
  if (it == holders_.end()) return std::nullopt;
  return it->second;
}

struct NodeManager::Instance {
  explicit Instance(const std::string& id) : handle(id) {}

  std::mutex op_mutex;
  OperatorHandle handle;  // written under op_mutex and state_mutex_
  // Below: guarded by op_mutex.
  std::unique_ptr<ProcessHandle> process;
  FetchedOperator op;
  std::string holder;
  std::deque<SteadyClock::time_point> crashes;
};

NodeManager::NodeManager(NodeManagerConfig config, std::shared_ptr<Registry> registry,
                         std::shared_ptr<ProcessBackend> backend)
    : config_(std::move(config)),
      registry_(std::move(registry)),
      backend_(std::move(backend)),
      queue_factory_(tcp_transport_factory(config_.queue_address)) {}

NodeManager::~NodeManager() {
  try {
    shutdown();
  } catch (const std::exception& e) {
    std::cerr << "cepless-node-manager: shutdown: " << e.what() << '\n';
  }
}

std::shared_ptr<NodeManager::Instance> NodeManager::find(const std::string& instance_id) {
  std::lock_guard lock(state_mutex_);
  const auto it = instances_.find(instance_id);
  if (it == instances_.end()) throw UnknownInstance("unknown instance '" + instance_id + "'");
  return it->second;
}

std::string NodeManager::new_instance_id(const std::string& name) {
  static thread_local std::mt19937_64 rng(std::random_device{}());
  static constexpr char kHex[] = "0123456789abcdef";
  while (true) {
    std::string id = name + "-";
    const auto bits = rng();
    for (int i = 0; i < 8; ++i) id.push_back(kHex[(bits >> (4 * i)) & 0xF]);
    if (instances_.count(id) == 0) return id;
  }
}

void NodeManager::set_handle(Instance& inst, const OperatorHandle& handle) {
  std::lock_guard lock(state_mutex_);
  inst.handle = handle;
}

std::unique_ptr<ProcessHandle> NodeManager::spawn(const FetchedOperator& op,
                                                  const OperatorHandle& handle,
                                                  const std::string& ctl_queue, bool paused) {
  OperatorContext ctx;
  ctx.queue_address = config_.queue_address;
  ctx.in_queue = handle.queues.input.str();
  ctx.out_queue = handle.queues.output.str();
  ctx.ctl_queue = ctl_queue;
  ctx.batch_size = config_.batch_size;
  ctx.backoff_increment = config_.backoff_increment;
  ctx.start_paused = paused;
  return backend_->start(op, ctx.to_env());
}

NodeManager::Wait NodeManager::wait_for_control(QueueConnection& conn,
                                                const std::string& ctl_queue,
                                                std::string_view message,
                                                ProcessHandle& process,
                                                std::chrono::milliseconds timeout) {
  const auto deadline = SteadyClock::now() + timeout;
  auto seen = [&] {
    const auto items = conn.range(ctl_queue, 0, 64);
    return std::find(items.begin(), items.end(), message) != items.end();
  };
  auto pause = std::chrono::microseconds(200);
  while (true) {
    if (seen()) return Wait::kSeen;
    if (!process.running()) return seen() ? Wait::kSeen : Wait::kExited;
    if (SteadyClock::now() >= deadline) return Wait::kTimeout;
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::microseconds(5000));
  }
}

// Drain-then-stop. Returns true when the worker had to be killed.
bool NodeManager::stop_worker(QueueConnection& conn, Instance& inst,
                              const std::string& ctl_queue) {
  if (!inst.process) return false;
  if (!inst.process->running()) return false;
  conn.push(ctl_queue, std::string(kDrain));
  const Wait w = wait_for_control(conn, ctl_queue, kDrained, *inst.process, config_.drain_timeout);
  if (w == Wait::kSeen && inst.process->wait_for(config_.drain_timeout)) return false;
  if (w == Wait::kExited) return false;
  // A reaped process can no longer TRIM; that is the bar on the old worker.
  inst.process->kill();
  return true;
}

OperatorHandle NodeManager::deploy(const std::string& name,
                                   const std::optional<std::string>& version) {
  FetchedOperator fetched = registry_->fetch(name, version);

  std::shared_ptr<Instance> inst;
  {
    std::lock_guard lock(state_mutex_);
    inst = std::make_shared<Instance>(new_instance_id(name));
    instances_.emplace(inst->handle.instance_id, inst);
  }
  std::lock_guard op(inst->op_mutex);
  OperatorHandle h = inst->handle;
  h.descriptor = fetched.descriptor;
  h.queue_address = config_.queue_address.to_string();
  h.ctl_queue = control_queue_name(h.instance_id, 0);
  h.started_at = epoch_micros();
  h.state = OperatorState::kStarting;
  set_handle(*inst, h);

  auto fail = [&](const std::string& error) {
    h.state = OperatorState::kFailed;
    h.last_error = error;
    h.pid = 0;
    set_handle(*inst, h);
    if (!inst->holder.empty()) tokens_.release(h.queues.input.str(), inst->holder);
    inst->holder.clear();
    return WorkerFailed(h.instance_id + ": " + error);
  };

  QueueConnection conn(queue_factory_());
  conn.create(h.queues.input.str());
  conn.create(h.queues.output.str());
  conn.remove(h.ctl_queue);

  inst->holder = holder_name(h.instance_id, 0);
  tokens_.acquire(h.queues.input.str(), inst->holder);
  try {
    inst->process = spawn(fetched, h, h.ctl_queue, false);
  } catch (const SpawnError& e) {
    throw fail(e.what());
  }
  h.pid = inst->process->pid();
  set_handle(*inst, h);

  switch (wait_for_control(conn, h.ctl_queue, kReady, *inst->process, config_.liveness_timeout)) {
    case Wait::kSeen:
      break;
    case Wait::kExited:
      throw fail(exit_detail(*inst->process));
    case Wait::kTimeout:
      inst->process->kill();
      throw fail("no readiness signal within " +
                 std::to_string(config_.liveness_timeout.count()) + " ms");
  }
  inst->op = std::move(fetched);
  h.state = OperatorState::kRunning;
  set_handle(*inst, h);
  return h;
}

UpdateReport NodeManager::update(const std::string& instance_id, const std::string& version) {
  const auto t_receipt = SteadyClock::now();
  auto inst = find(instance_id);
  std::lock_guard op(inst->op_mutex);
  OperatorHandle h = status(instance_id);
  if (h.state != OperatorState::kRunning) {
    throw InvalidState(instance_id + " is " + std::string(to_string(h.state)) +
                       ", not Running");
  }
  FetchedOperator fetched = registry_->fetch(h.descriptor.name, version);

  UpdateReport report;
  report.instance_id = instance_id;
  report.old_version = h.descriptor.version;
  report.new_version = fetched.descriptor.version;

  QueueConnection conn(queue_factory_());
  const std::uint32_t generation = h.generation + 1;
  const std::string new_ctl = control_queue_name(instance_id, generation);
  conn.remove(new_ctl);

  std::unique_ptr<ProcessHandle> next;
  try {
    next = spawn(fetched, h, new_ctl, true);
  } catch (const SpawnError& e) {
    throw UpdateFailed(instance_id + ": " + e.what());
  }
  // Until the replacement is ready the old worker is untouched, so failing
  // here is the rollback.
  switch (wait_for_control(conn, new_ctl, kReady, *next, config_.liveness_timeout)) {
    case Wait::kSeen:
      break;
    case Wait::kExited: {
      const auto detail = exit_detail(*next);
      conn.remove(new_ctl);
      throw UpdateFailed(instance_id + ": replacement failed, previous version kept: " + detail);
    }
    case Wait::kTimeout:
      next->kill();
      conn.remove(new_ctl);
      throw UpdateFailed(instance_id + ": replacement not ready, previous version kept");
  }
  const auto t_ready = SteadyClock::now();
  report.update_duration_ms = ms_between(t_receipt, t_ready);

  h.state = OperatorState::kUpdating;
  set_handle(*inst, h);

  const auto t_drain = SteadyClock::now();
  report.forced_kill = stop_worker(conn, *inst, h.ctl_queue);
  report.drain_duration_ms = ms_between(t_drain, SteadyClock::now());
  report.len_before_stop = conn.length(h.queues.input.str());

  const std::string input = h.queues.input.str();
  tokens_.release(input, inst->holder);
  inst->holder = holder_name(instance_id, generation);
  tokens_.acquire(input, inst->holder);
  report.len_after_start = conn.length(input);
  report.events_in_flight = report.len_after_start;
  conn.push(new_ctl, std::string(kActivate));
  report.switch_duration_ms = ms_between(t_receipt, SteadyClock::now());

  conn.remove(h.ctl_queue);
  inst->process = std::move(next);
  inst->op = std::move(fetched);
  h.descriptor = inst->op.descriptor;
  h.ctl_queue = new_ctl;
  h.generation = generation;
  h.pid = inst->process->pid();
  h.started_at = epoch_micros();
  h.state = OperatorState::kRunning;
  set_handle(*inst, h);
  return report;
}

void NodeManager::remove(const std::string& instance_id) {
  auto inst = find(instance_id);
  std::lock_guard op(inst->op_mutex);
  OperatorHandle h = status(instance_id);
  if (h.state == OperatorState::kStopped) {
    throw InvalidState(instance_id + " is already removed");
  }
  QueueConnection conn(queue_factory_());
  stop_worker(conn, *inst, h.ctl_queue);
  inst->process.reset();
  if (!inst->holder.empty()) tokens_.release(h.queues.input.str(), inst->holder);
  inst->holder.clear();
  for (const auto& q : {h.queues.input.str(), h.queues.output.str(), h.ctl_queue,
                        dead_letter_queue_name(instance_id)}) {
    conn.remove(q);
  }
  h.state = OperatorState::kStopped;
  h.pid = 0;
  set_handle(*inst, h);
}

OperatorHandle NodeManager::status(const std::string& instance_id) {
  std::lock_guard lock(state_mutex_);
  const auto it = instances_.find(instance_id);
  if (it == instances_.end()) throw UnknownInstance("unknown instance '" + instance_id + "'");
  return it->second->handle;
}

std::vector<OperatorHandle> NodeManager::list() {
  std::lock_guard lock(state_mutex_);
  std::vector<OperatorHandle> out;
  for (const auto& [id, inst] : instances_) out.push_back(inst->handle);
  return out;
}

bool NodeManager::restart_crashed(Instance& inst) {
  OperatorHandle h = [&] {
    std::lock_guard lock(state_mutex_);
    return inst.handle;
  }();
  const std::string detail = exit_detail(*inst.process);
  const auto now = SteadyClock::now();
  inst.crashes.push_back(now);
  while (!inst.crashes.empty() && now - inst.crashes.front() > config_.crash_window) {
    inst.crashes.pop_front();
  }
  const std::string input = h.queues.input.str();
  auto give_up = [&](const std::string& error) {
    if (!inst.holder.empty()) tokens_.release(input, inst.holder);
    inst.holder.clear();
    inst.process.reset();
    h.state = OperatorState::kFailed;
    h.pid = 0;
    h.last_error = error;
    set_handle(inst, h);
    std::cerr << "cepless-node-manager: " << h.instance_id << " failed: " << error << '\n';
    return false;
  };
  if (static_cast<int>(inst.crashes.size()) >= config_.max_crashes) {
    return give_up(std::to_string(inst.crashes.size()) + " crashes within " +
                   std::to_string(config_.crash_window.count()) + " ms; last: " + detail);
  }

  QueueConnection conn(queue_factory_());
  const std::uint32_t generation = h.generation + 1;
  const std::string ctl = control_queue_name(h.instance_id, generation);
  conn.remove(ctl);
  tokens_.release(input, inst.holder);
  inst.holder = holder_name(h.instance_id, generation);
  tokens_.acquire(input, inst.holder);
  try {
    inst.process = spawn(inst.op, h, ctl, false);
  } catch (const SpawnError& e) {
    return give_up(e.what());
  }
  if (wait_for_control(conn, ctl, kReady, *inst.process, config_.liveness_timeout) !=
      Wait::kSeen) {
    inst.process->kill();
    return give_up("restart failed: " + exit_detail(*inst.process));
  }
  conn.remove(h.ctl_queue);
  h.ctl_queue = ctl;
  h.generation = generation;
  h.pid = inst.process->pid();
  h.restarts += 1;
  h.last_error = detail;
  h.started_at = epoch_micros();
  h.state = OperatorState::kRunning;
  set_handle(inst, h);
  return true;
}

std::size_t NodeManager::supervise_once() {
  std::vector<std::shared_ptr<Instance>> snapshot;
  {
    std::lock_guard lock(state_mutex_);
    for (const auto& [id, inst] : instances_) snapshot.push_back(inst);
  }
  std::size_t restarted = 0;
  for (const auto& inst : snapshot) {
    std::unique_lock op(inst->op_mutex, std::try_to_lock);
    if (!op.owns_lock()) continue;
    OperatorState state;
    {
      std::lock_guard lock(state_mutex_);
      state = inst->handle.state;
    }
    if (state != OperatorState::kRunning || !inst->process || inst->process->running()) continue;
    try {
      if (restart_crashed(*inst)) ++restarted;
    } catch (const std::exception& e) {
      std::cerr << "cepless-node-manager: supervision: " << e.what() << '\n';
    }
  }
  return restarted;
}

void NodeManager::supervisor_loop() {
  std::unique_lock lock(supervisor_mutex_);
  while (!supervisor_stop_) {
    lock.unlock();
    supervise_once();
    lock.lock();
    supervisor_cv_.wait_for(lock, config_.supervise_interval, [this] { return supervisor_stop_; });
  }
}

void NodeManager::start_supervisor() {
  std::lock_guard lock(supervisor_mutex_);
  if (supervisor_.joinable()) return;
  supervisor_stop_ = false;
  supervisor_ = std::thread([this] { supervisor_loop(); });
}

void NodeManager::stop_supervisor() {
  {
    std::lock_guard lock(supervisor_mutex_);
    supervisor_stop_ = true;
  }
  supervisor_cv_.notify_all();
  if (supervisor_.joinable()) supervisor_.join();
}

void NodeManager::shutdown() {
  stop_supervisor();
  std::vector<std::shared_ptr<Instance>> snapshot;
  {
    std::lock_guard lock(state_mutex_);
    for (const auto& [id, inst] : instances_) snapshot.push_back(inst);
  }
  for (const auto& inst : snapshot) {
    std::lock_guard op(inst->op_mutex);
    if (!inst->process) continue;
    OperatorHandle h = status(inst->handle.instance_id);
    try {
      QueueConnection conn(queue_factory_());
      stop_worker(conn, *inst, h.ctl_queue);
    } catch (const std::exception&) {
      inst->process->kill();
    }
    inst->process.reset();
    if (!inst->holder.empty()) tokens_.release(h.queues.input.str(), inst->holder);
    inst->holder.clear();
    if (h.state != OperatorState::kFailed) h.state = OperatorState::kStopped;
    h.pid = 0;
    set_handle(*inst, h);
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

protocol::Reply document(const nlohmann::json& doc) {
  return protocol::Reply::of_array({canonical::dump(doc)});
}

}  // namespace

ControlServer::ControlServer(Deployer& deployer)
    : deployer_(deployer), server_([this](const protocol::Request& r) { return handle(r); }) {}

ControlServer::~ControlServer() { stop(); }

void ControlServer::start(const net::Address& bind_address) {
  server_.bind(bind_address);
  server_.start();
}

void ControlServer::serve(const net::Address& bind_address) {
  server_.bind(bind_address);
  server_.run();
}

void ControlServer::stop() { server_.stop(); }

protocol::Reply ControlServer::handle(const protocol::Request& request) {
  using protocol::Reply;
  if (request.empty()) return Reply::of_error("invalid-request: empty command");
  const std::string verb = upper(request[0]);
  const std::size_t argc = request.size() - 1;
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (argc < lo || argc > hi) {
      throw std::invalid_argument("wrong number of arguments for " + verb);
    }
  };
  try {
    if (verb == "PING") {
      arity(0, 0);
      return Reply::ok();
    }
    if (verb == "DEPLOY") {
      arity(1, 2);
      std::optional<std::string> version;
      if (argc == 2) version = request[2];
      return document(deployer_.deploy(request[1], version).to_json());
    }
    if (verb == "UPDATE") {
      arity(2, 2);
      return document(deployer_.update(request[1], request[2]).to_json());
    }
    if (verb == "REMOVE") {
      arity(1, 1);
      deployer_.remove(request[1]);
      return document(deployer_.status(request[1]).to_json());
    }
    if (verb == "STATUS") {
      arity(0, 1);
      if (argc == 1) return document(deployer_.status(request[1]).to_json());
      nlohmann::json all = nlohmann::json::array();
      for (const auto& h : deployer_.list()) all.push_back(h.to_json());
      return document(all);
    }
    return Reply::of_error("invalid-request: unknown command '" + request[0] + "'");
  } catch (const NotFound& e) {
    return Reply::of_error(std::string("not-found: ") + e.what());
  } catch (const CorruptPackage& e) {
    return Reply::of_error(std::string("corrupt-package: ") + e.what());
  } catch (const UnknownInstance& e) {
    return Reply::of_error(std::string("unknown-instance: ") + e.what());
  } catch (const InvalidState& e) {
    return Reply::of_error(std::string("invalid-state: ") + e.what());
  } catch (const WorkerFailed& e) {
    return Reply::of_error(std::string("worker-failed: ") + e.what());
  } catch (const UpdateFailed& e) {
    return Reply::of_error(std::string("update-failed: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return Reply::of_error(std::string("invalid-request: ") + e.what());
  } catch (const std::exception& e) {
    return Reply::of_error(std::string("internal: ") + e.what());
  }
}

RemoteNodeManager::RemoteNodeManager(net::Address address, std::chrono::milliseconds timeout)
    : address_(std::move(address)), timeout_(timeout) {}

nlohmann::json RemoteNodeManager::call(protocol::Request request) {
  std::lock_guard lock(mutex_);
  protocol::Reply reply;
  try {
    if (!transport_) transport_ = std::make_unique<TcpTransport>(address_, timeout_);
    const protocol::Request batch[] = {std::move(request)};
    reply = std::move(transport_->exchange(batch).at(0));
  } catch (const TransportError& e) {
    transport_.reset();
    throw NodeManagerError(std::string("node manager unreachable: ") + e.what());
  }
  if (reply.is_error()) {
    const auto colon = reply.error.find(": ");
    const std::string kind = reply.error.substr(0, colon);
    const std::string message =
        colon == std::string::npos ? reply.error : reply.error.substr(colon + 2);
    if (kind == "not-found") throw NotFound(message);
    if (kind == "corrupt-package") throw CorruptPackage(message);
    if (kind == "unknown-instance") throw UnknownInstance(message);
    if (kind == "invalid-state") throw InvalidState(message);
    if (kind == "worker-failed") throw WorkerFailed(message);
    if (kind == "update-failed") throw UpdateFailed(message);
    throw NodeManagerError(reply.error);
  }
  if (reply.kind == protocol::Reply::Kind::kOk) return nullptr;
  if (reply.kind != protocol::Reply::Kind::kArray || reply.items.size() != 1) {
    throw NodeManagerError("unexpected control reply " + protocol::to_string(reply));
  }
  return canonical::parse(reply.items[0]);
}

OperatorHandle RemoteNodeManager::deploy(const std::string& name,
                                         const std::optional<std::string>& version) {
  protocol::Request r{"DEPLOY", name};
  if (version) r.push_back(*version);
  return OperatorHandle::from_json(call(std::move(r)));
}

UpdateReport RemoteNodeManager::update(const std::string& instance_id,
                                       const std::string& version) {
  return UpdateReport::from_json(call({"UPDATE", instance_id, version}));
}

void RemoteNodeManager::remove(const std::string& instance_id) { call({"REMOVE", instance_id}); }

OperatorHandle RemoteNodeManager::status(const std::string& instance_id) {
  return OperatorHandle::from_json(call({"STATUS", instance_id}));
}

std::vector<OperatorHandle> RemoteNodeManager::list() {
  std::vector<OperatorHandle> out;
  for (const auto& doc : call({"STATUS"})) out.push_back(OperatorHandle::from_json(doc));
  return out;
}

void RemoteNodeManager::ping() { call({"PING"}); }

}  // namespace cepless
