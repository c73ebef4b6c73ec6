#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cepless/net.hpp"
#include "cepless/protocol.hpp"

namespace cepless {

class QueueStore;

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One command flush: every request is written in a single burst and the
/// replies for all of them are collected before returning.
struct PushCommand {
  std::string_view queue;
  std::string_view payload;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::vector<protocol::Reply> exchange(
      std::span<const protocol::Request> requests) = 0;
  /// A flush of PUSH commands only; equivalent to exchange() on the same list.
  virtual std::vector<protocol::Reply> push(std::span<const PushCommand> pushes);
};

using TransportFactory = std::function<std::unique_ptr<Transport>()>;

class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(const net::Address& address,
                        std::chrono::milliseconds reply_timeout = std::chrono::seconds(10));

  std::vector<protocol::Reply> exchange(std::span<const protocol::Request> requests) override;
  std::vector<protocol::Reply> push(std::span<const PushCommand> pushes) override;

 private:
  std::vector<protocol::Reply> flush(std::size_t expected);

  net::Socket socket_;
  protocol::ReplyParser parser_;
  std::string out_;
  std::vector<char> in_;
};

/// Executes against a QueueStore in the same process. Same semantics as the
/// TCP path minus the sockets; used by tests and by embedded setups.
class LocalTransport final : public Transport {
 public:
  explicit LocalTransport(QueueStore& store) : store_(store) {}
  std::vector<protocol::Reply> exchange(std::span<const protocol::Request> requests) override;

 private:
  QueueStore& store_;
};

TransportFactory tcp_transport_factory(net::Address address);
TransportFactory local_transport_factory(QueueStore& store);

/// Blocking single-command helpers on top of a Transport.
class QueueConnection {
 public:
  explicit QueueConnection(std::unique_ptr<Transport> transport)
      : transport_(std::move(transport)) {}
  explicit QueueConnection(const net::Address& address)
      : transport_(std::make_unique<TcpTransport>(address)) {}

  void ping();
  void create(const std::string& queue);
  /// Returns false if the queue did not exist.
  bool remove(const std::string& queue);
  void push(const std::string& queue, std::string payload);
  std::vector<std::string> range(const std::string& queue, std::size_t start,
                                 std::size_t count);
  void trim(const std::string& queue, std::size_t count);
  std::size_t length(const std::string& queue);

  Transport& transport() { return *transport_; }

 private:
  protocol::Reply call(protocol::Request request);

  std::unique_ptr<Transport> transport_;
};

}  // namespace cepless
