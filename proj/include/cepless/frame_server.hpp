#pragma once

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "cepless/net.hpp"
#include "cepless/protocol.hpp"

namespace cepless {

using FrameHandler = std::function<protocol::Reply(protocol::Request&&)>;
/// Appends the encoded reply to `out` itself. Must not throw after writing.
using FrameWriter = std::function<void(protocol::Request&&, std::string& out)>;

/// TCP server for the frame protocol. One thread per connection; each
/// connection processes its frames strictly in arrival order and writes the
/// replies for everything it has read in a single burst. An I/O error only
/// closes the connection it happened on.
class FrameServer {
 public:
  explicit FrameServer(FrameHandler handler);
  explicit FrameServer(FrameWriter writer);
  ~FrameServer();

  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  /// Throws net::NetError when the address cannot be bound. Port 0 picks an
  /// ephemeral port, see port().
  void bind(const net::Address& address);

  /// Blocks until stop() is called.
  void run();
  /// run() on a background thread.
  void start();
  /// Closes the listener and every open connection, then joins all threads.
  void stop();

  std::uint16_t port() const { return port_; }
  std::string address() const;
  std::size_t open_connections() const;

 private:
  struct Connection {
    net::Socket socket;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void serve_connection(Connection& conn);
  void reap_finished();

  FrameWriter writer_;
  net::Socket listener_;
  net::Address bound_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  mutable std::mutex connections_mutex_;
  std::list<std::unique_ptr<Connection>> connections_;
};

}  // namespace cepless
