#include "cepless/transport.hpp"

#include "cepless/queue_store.hpp"

namespace cepless {

TcpTransport::TcpTransport(const net::Address& address,
                           std::chrono::milliseconds reply_timeout)
    : in_(512 * 1024) {
  try {
    socket_ = net::connect_tcp(address);
  } catch (const net::NetError& e) {
    throw TransportError(e.what());
  }
  socket_.set_recv_timeout(reply_timeout);
}

std::vector<protocol::Reply> Transport::push(std::span<const PushCommand> pushes) {
  std::vector<protocol::Request> requests;
  requests.reserve(pushes.size());
  for (const auto& p : pushes) {
    requests.push_back({"PUSH", std::string(p.queue), std::string(p.payload)});
  }
  return exchange(requests);
}

std::vector<protocol::Reply> TcpTransport::exchange(
    std::span<const protocol::Request> requests) {
  if (requests.empty()) return {};
  out_.clear();
  for (const auto& r : requests) protocol::append_request(out_, r);
  return flush(requests.size());
}

std::vector<protocol::Reply> TcpTransport::push(std::span<const PushCommand> pushes) {
  if (pushes.empty()) return {};
  out_.clear();
  for (const auto& p : pushes) protocol::append_push(out_, p.queue, p.payload);
  return flush(pushes.size());
}

std::vector<protocol::Reply> TcpTransport::flush(std::size_t expected) {
  std::vector<protocol::Reply> replies;
  replies.reserve(expected);
  try {
    socket_.send_all(out_);
    while (replies.size() < expected) {
      while (auto reply = parser_.next()) {
        replies.push_back(std::move(*reply));
        if (replies.size() == expected) break;
      }
      if (replies.size() == expected) break;
      const std::size_t n = socket_.recv_some(in_.data(), in_.size());
      if (n == 0) throw TransportError("connection closed by server");
      parser_.feed(std::string_view(in_.data(), n));
    }
  } catch (const net::NetError& e) {
    throw TransportError(e.what());
  } catch (const protocol::ProtocolError& e) {
    throw TransportError(std::string("corrupt reply stream: ") + e.what());
  }
  return replies;
}

std::vector<protocol::Reply> LocalTransport::exchange(
    std::span<const protocol::Request> requests) {
  std::vector<protocol::Reply> replies;
  replies.reserve(requests.size());
  for (const auto& r : requests) replies.push_back(store_.execute(r));
  return replies;
}

TransportFactory tcp_transport_factory(net::Address address) {
  return [address]() -> std::unique_ptr<Transport> {
    return std::make_unique<TcpTransport>(address);
  };
}

TransportFactory local_transport_factory(QueueStore& store) {
  return [&store]() -> std::unique_ptr<Transport> {
    return std::make_unique<LocalTransport>(store);
  };
}

protocol::Reply QueueConnection::call(protocol::Request request) {
  protocol::Request batch[] = {std::move(request)};
  auto replies = transport_->exchange(batch);
  return std::move(replies.at(0));
}

namespace {

void expect_ok(const protocol::Reply& reply, const char* verb) {
  if (reply.is_error()) throw TransportError(std::string(verb) + ": " + reply.error);
}

}  // namespace

void QueueConnection::ping() { expect_ok(call({"PING"}), "PING"); }

void QueueConnection::create(const std::string& queue) {
  expect_ok(call({"QCREATE", queue}), "QCREATE");
}

bool QueueConnection::remove(const std::string& queue) {
  const auto reply = call({"QDELETE", queue});
  if (reply.is_error()) {
    if (reply.error == "unknown queue") return false;
    throw TransportError("QDELETE: " + reply.error);
  }
  return true;
}

void QueueConnection::push(const std::string& queue, std::string payload) {
  expect_ok(call({"PUSH", queue, std::move(payload)}), "PUSH");
}

std::vector<std::string> QueueConnection::range(const std::string& queue, std::size_t start,
                                                std::size_t count) {
  auto reply = call({"RANGE", queue, std::to_string(start), std::to_string(count)});
  expect_ok(reply, "RANGE");
  return std::move(reply.items);
}

void QueueConnection::trim(const std::string& queue, std::size_t count) {
  expect_ok(call({"TRIM", queue, std::to_string(count)}), "TRIM");
}

std::size_t QueueConnection::length(const std::string& queue) {
  const auto reply = call({"LEN", queue});
  expect_ok(reply, "LEN");
  return static_cast<std::size_t>(reply.integer);
}

}  // namespace cepless
