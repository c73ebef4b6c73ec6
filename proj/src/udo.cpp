#include "cepless/udo.hpp"

#include <future>
#include <iostream>

namespace cepless {

using namespace std::chrono_literals;

namespace {

struct ListenerEntry {
  EventListener on_event;
  std::atomic<bool> active{true};
};

}  // namespace

struct UdoInterface::Operator {
  explicit Operator(OperatorAddress a) : address(std::move(a)) {}

  OperatorAddress address;
  TransportFactory factory;
  std::unique_ptr<BatchingClient> sender;
  std::atomic<bool> removed{false};

  std::mutex receiver_mutex;
  std::unique_ptr<BatchingClient> receiver;
  std::map<std::uint64_t, std::shared_ptr<ListenerEntry>> listeners;

  std::mutex dispatch_mutex;
  std::atomic<std::thread::id> dispatch_thread{};

  std::mutex conn_mutex;
  std::unique_ptr<QueueConnection> conn;

  std::vector<std::shared_ptr<ListenerEntry>> snapshot() {
    std::lock_guard lock(receiver_mutex);
    std::vector<std::shared_ptr<ListenerEntry>> out;
    out.reserve(listeners.size());
    for (const auto& [id, entry] : listeners) out.push_back(entry);
    return out;
  }

  QueueConnection& connection() {
    if (!conn) conn = std::make_unique<QueueConnection>(factory());
    return *conn;
  }
};

UdoInterface::UdoInterface(std::shared_ptr<Deployer> deployer, UdoConfig config)
    : deployer_(std::move(deployer)), config_(std::move(config)) {
  config_.batching.validate();
}

UdoInterface::~UdoInterface() {
  std::vector<std::thread> requests;
  {
    std::lock_guard lock(mutex_);
    requests.swap(requests_);
  }
  for (auto& t : requests) t.join();
  std::map<std::string, std::shared_ptr<Operator>> ops;
  {
    std::lock_guard lock(mutex_);
    ops.swap(operators_);
  }
  for (auto& [id, op] : ops) {
    op->removed = true;
    try {
      op->sender->stop(1s);
    } catch (const std::exception& e) {
      std::cerr << "cepless: " << id << ": " << e.what() << '\n';
    }
    std::unique_ptr<BatchingClient> receiver;
    {
      std::lock_guard lock(op->receiver_mutex);
      receiver = std::move(op->receiver);
    }
    if (receiver) {
      try {
        receiver->stop(1s);
      } catch (const std::exception& e) {
        std::cerr << "cepless: " << id << ": " << e.what() << '\n';
      }
    }
  }
}

TransportFactory UdoInterface::factory_for(const net::Address& address) const {
  return config_.transport_for ? config_.transport_for(address) : tcp_transport_factory(address);
}

std::shared_ptr<UdoInterface::Operator> UdoInterface::find(const std::string& instance_id) const {
  std::lock_guard lock(mutex_);
  const auto it = operators_.find(instance_id);
  if (it == operators_.end() || it->second->removed) {
    throw StaleAddress("no live operator '" + instance_id + "'");
  }
  return it->second;
}

void UdoInterface::register_operator(const OperatorHandle& handle,
                                     const OperatorAddress& address) {
  auto op = std::make_shared<Operator>(address);
  op->factory = factory_for(address.queue_server);
  op->sender = std::make_unique<BatchingClient>(
      config_.batching, op->factory, BatchingClient::Endpoints{handle.queues.input.str(), ""});
  op->sender->start();
  std::lock_guard lock(mutex_);
  operators_[handle.instance_id] = std::move(op);
}

std::uint64_t UdoInterface::request_operator(const std::string& operator_name,
                                             ReadyCallback on_ready, DeployErrorCallback on_error,
                                             std::optional<std::string> version) {
  std::lock_guard lock(mutex_);
  const std::uint64_t request = next_request_++;
  requests_.emplace_back([this, operator_name, version, on_ready = std::move(on_ready),
                          on_error = std::move(on_error)] {
    auto fail = [&](std::exception_ptr error) {
      if (on_error) {
        on_error(error);
      } else {
        try {
          std::rethrow_exception(error);
        } catch (const std::exception& e) {
          std::cerr << "cepless: deployment of " << operator_name << " failed: " << e.what()
                    << '\n';
        }
      }
    };
    auto deployment = std::async(std::launch::async, [this, operator_name, version] {
      return deployer_->deploy(operator_name, version);
    });
    if (deployment.wait_for(config_.deploy_timeout) != std::future_status::ready) {
      fail(std::make_exception_ptr(
          DeploymentError("timeout deploying '" + operator_name + "'")));
      try {
        // Nobody will use a late instance; do not leave it running.
        deployer_->remove(deployment.get().instance_id);
      } catch (const std::exception&) {
      }
      return;
    }
    OperatorHandle handle("pending");
    try {
      handle = deployment.get();
    } catch (const NotFound& e) {
      fail(std::make_exception_ptr(DeploymentError(std::string("not in registry: ") + e.what())));
      return;
    } catch (const std::exception& e) {
      fail(std::make_exception_ptr(DeploymentError(e.what())));
      return;
    }
    OperatorAddress address{handle.instance_id, handle.queues,
                            net::Address::parse(handle.queue_address)};
    register_operator(handle, address);
    on_ready(address);
  });
  return request;
}

OperatorAddress UdoInterface::await_operator(const std::string& operator_name,
                                             std::optional<std::string> version) {
  auto promise = std::make_shared<std::promise<OperatorAddress>>();
  auto result = promise->get_future();
  request_operator(
      operator_name, [promise](const OperatorAddress& a) { promise->set_value(a); },
      [promise](std::exception_ptr e) { promise->set_exception(e); }, std::move(version));
  return result.get();
}

void UdoInterface::send_event(const OperatorAddress& address, const Event& event) {
  const auto op = find(address.instance_id);
  try {
    op->sender->receive_event(event);
  } catch (const ClientStopped&) {
    throw StaleAddress("operator '" + address.instance_id + "' was removed");
  }
}

void UdoInterface::dispatch(Operator& op, const std::vector<Event>& events) {
  std::lock_guard lock(op.dispatch_mutex);
  op.dispatch_thread = std::this_thread::get_id();
  const auto listeners = op.snapshot();
  for (const auto& event : events) {
    for (const auto& entry : listeners) {
      if (!entry->active) continue;
      try {
        entry->on_event(event);
      } catch (...) {
        ++listener_failures_;
      }
    }
  }
  op.dispatch_thread = std::thread::id{};
}

Listener UdoInterface::add_listener(const OperatorAddress& address, EventListener on_event) {
  const auto op = find(address.instance_id);
  auto entry = std::make_shared<ListenerEntry>();
  entry->on_event = std::move(on_event);
  const std::uint64_t id = next_listener_++;
  std::lock_guard lock(op->receiver_mutex);
  op->listeners.emplace(id, std::move(entry));
  if (!op->receiver) {
    Operator* raw = op.get();
    op->receiver = std::make_unique<BatchingClient>(
        config_.batching, op->factory,
        BatchingClient::Endpoints{"", address.queues.output.str()},
        [this, raw](const std::vector<Event>& events) { dispatch(*raw, events); });
    op->receiver->start();
  }
  return Listener{id, address.instance_id};
}

void UdoInterface::remove_listener(const Listener& listener) {
  std::shared_ptr<Operator> op;
  {
    std::lock_guard lock(mutex_);
    const auto it = operators_.find(listener.instance_id);
    if (it != operators_.end()) op = it->second;
  }
  if (!op) throw ListenerError("listener " + std::to_string(listener.id) + " is not registered");
  {
    std::lock_guard lock(op->receiver_mutex);
    const auto it = op->listeners.find(listener.id);
    if (it == op->listeners.end()) {
      throw ListenerError("listener " + std::to_string(listener.id) + " is not registered");
    }
    it->second->active = false;
    op->listeners.erase(it);
  }
  // Wait out a dispatch in progress unless we are inside it.
  if (op->dispatch_thread.load() != std::this_thread::get_id()) {
    std::lock_guard wait(op->dispatch_mutex);
  }
}

bool UdoInterface::quiescent(const OperatorAddress& address) {
  const auto op = find(address.instance_id);
  if (op->sender->pending() > 0) return false;
  bool has_receiver = false;
  {
    std::lock_guard lock(op->receiver_mutex);
    if (op->receiver) {
      if (!op->receiver->receive_idle()) return false;
      has_receiver = true;
    }
  }
  std::lock_guard lock(op->conn_mutex);
  auto& conn = op->connection();
  if (conn.length(address.queues.input.str()) > 0) return false;
  return !has_receiver || conn.length(address.queues.output.str()) == 0;
}

void UdoInterface::remove_operator(const OperatorAddress& address) {
  const auto op = find(address.instance_id);
  const auto deadline = std::chrono::steady_clock::now() + config_.remove_drain_timeout;
  try {
    while (std::chrono::steady_clock::now() < deadline && !quiescent(address)) {
      std::this_thread::sleep_for(2ms);
    }
  } catch (const TransportError& e) {
    std::cerr << "cepless: " << address.instance_id << ": " << e.what() << '\n';
  }
  op->removed = true;
  try {
    op->sender->stop(1s);
  } catch (const ShutdownTimeout& e) {
    std::cerr << "cepless: " << address.instance_id << ": " << e.what() << '\n';
  }
  deployer_->remove(address.instance_id);
  {
    std::lock_guard lock(op->receiver_mutex);
    for (auto& [id, entry] : op->listeners) entry->active = false;
  }
  std::unique_ptr<BatchingClient> receiver;
  {
    std::lock_guard lock(op->receiver_mutex);
    receiver = std::move(op->receiver);
  }
  if (receiver) {
    try {
      receiver->stop(1s);
    } catch (const std::exception& e) {
      std::cerr << "cepless: " << address.instance_id << ": " << e.what() << '\n';
    }
  }
  std::lock_guard lock(mutex_);
  operators_.erase(address.instance_id);
}

UpdateReport UdoInterface::update_operator(const OperatorAddress& address,
                                           const std::string& version) {
  find(address.instance_id);
  return deployer_->update(address.instance_id, version);
}

}  // namespace cepless
