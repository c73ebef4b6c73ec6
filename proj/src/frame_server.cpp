#include "cepless/frame_server.hpp"

#include <poll.h>
#include <pthread.h>
#include <sys/socket.h>

#include <cerrno>
#include <iostream>
#include <vector>

namespace cepless {

FrameServer::FrameServer(FrameHandler handler)
    : writer_([handler = std::move(handler)](protocol::Request&& r, std::string& out) {
        protocol::append_reply(out, handler(std::move(r)));
      }) {}

FrameServer::FrameServer(FrameWriter writer) : writer_(std::move(writer)) {}

FrameServer::~FrameServer() { stop(); }

void FrameServer::bind(const net::Address& address) {
  listener_ = net::listen_tcp(address);
  port_ = net::local_port(listener_);
  bound_ = address;
  bound_.port = port_;
}

std::string FrameServer::address() const {
  net::Address a = bound_;
  if (a.host.empty() || a.host == "0.0.0.0") a.host = "127.0.0.1";
  return a.to_string();
}

std::size_t FrameServer::open_connections() const {
  std::lock_guard lock(connections_mutex_);
  std::size_t n = 0;
  for (const auto& c : connections_) n += c->done ? 0 : 1;
  return n;
}

void FrameServer::start() {
  accept_thread_ = std::thread([this] { run(); });
}

void FrameServer::run() {
  if (!listener_.valid()) throw net::NetError("server is not bound");
  while (!stopping_) {
    pollfd pfd{listener_.fd(), POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    reap_finished();
    if (rc <= 0 || stopping_) continue;
    const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;

    auto conn = std::make_unique<Connection>();
    conn->socket = net::Socket(fd);
    Connection* raw = conn.get();
    std::lock_guard lock(connections_mutex_);
    if (stopping_) break;
    connections_.push_back(std::move(conn));
    raw->thread = std::thread([this, raw] {
      pthread_setname_np(pthread_self(), "frame-conn");
      serve_connection(*raw);
    });
  }
}

void FrameServer::reap_finished() {
  std::list<std::unique_ptr<Connection>> finished;
  {
    std::lock_guard lock(connections_mutex_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if ((*it)->done) {
        finished.push_back(std::move(*it));
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : finished) {
    if (c->thread.joinable()) c->thread.join();
  }
}

void FrameServer::stop() {
  if (stopping_.exchange(true)) {
    if (accept_thread_.joinable()) accept_thread_.join();
    return;
  }
  listener_.shutdown();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::list<std::unique_ptr<Connection>> all;
  {
    std::lock_guard lock(connections_mutex_);
    for (auto& c : connections_) c->socket.shutdown();
    all.swap(connections_);
  }
  for (auto& c : all) {
    if (c->thread.joinable()) c->thread.join();
  }
  listener_.close();
}

void FrameServer::serve_connection(Connection& conn) {
  protocol::RequestParser parser;
  std::vector<char> buf(256 * 1024);
  std::string out;
  try {
    while (!stopping_) {
      const std::size_t n = conn.socket.recv_some(buf.data(), buf.size());
      if (n == 0) break;
      parser.feed(std::string_view(buf.data(), n));
      bool close_after = false;
      while (auto parsed = parser.next()) {
        if (auto* request = std::get_if<protocol::Request>(&*parsed)) {
          try {
            writer_(std::move(*request), out);
          } catch (const std::exception& e) {
            protocol::append_reply(out, protocol::Reply::of_error(e.what()));
          }
        } else {
          const auto& err = std::get<protocol::FrameError>(*parsed);
          protocol::append_reply(out, protocol::Reply::of_error(err.message));
          if (err.fatal) {
            close_after = true;
            break;
          }
        }
      }
      if (!out.empty()) {
        conn.socket.send_all(out);
        out.clear();
      }
      if (close_after) break;
    }
  } catch (const net::NetError&) {
    // Per-connection failure; the server keeps running.
  }
  conn.socket.shutdown();
  conn.done = true;
}

}  // namespace cepless
