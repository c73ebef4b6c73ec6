#include "cepless/queue_server.hpp"

namespace cepless {

QueueServer::QueueServer(std::size_t max_queue_items)
    : store_(std::make_unique<QueueStore>(max_queue_items)),
      server_(FrameWriter([store = store_.get()](protocol::Request&& r, std::string& out) {
        store->execute_into(std::move(r), out);
      })) {}

void QueueServer::start(const net::Address& bind_address) {
  server_.bind(bind_address);
  server_.start();
}

void QueueServer::serve(const net::Address& bind_address) {
  server_.bind(bind_address);
  server_.run();
}

void QueueServer::stop() { server_.stop(); }

}  // namespace cepless
