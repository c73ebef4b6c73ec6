#pragma once

#include <memory>
#include <string>

#include "cepless/frame_server.hpp"
#include "cepless/queue_store.hpp"

namespace cepless {

inline constexpr std::uint16_t kDefaultQueuePort = 6480;
inline constexpr const char* kQueueAddrEnv = "CEPLESS_QUEUE_ADDR";

/// The in-memory queuing system: a QueueStore behind a FrameServer. Queue
/// contents live as long as the server does, independent of client
/// connections, which is what lets operator workers be replaced freely.
class QueueServer {
 public:
  explicit QueueServer(std::size_t max_queue_items = kDefaultMaxQueueItems);

  /// Binds and starts serving in the background.
  void start(const net::Address& bind_address);
  /// Binds and serves on the calling thread until stop().
  void serve(const net::Address& bind_address);
  void stop();

  std::string address() const { return server_.address(); }
  std::uint16_t port() const { return server_.port(); }
  QueueStore& store() { return *store_; }

 private:
  std::unique_ptr<QueueStore> store_;
  FrameServer server_;
};

}  // namespace cepless
