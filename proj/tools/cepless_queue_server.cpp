// Standalone queue server.
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "cepless/queue_server.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CEPless queue server"};
  std::string bind = "127.0.0.1:" + std::to_string(cepless::kDefaultQueuePort);
  if (const char* env = std::getenv(cepless::kQueueAddrEnv); env != nullptr && *env != '\0') {
    bind = env;
  }
  std::size_t max_items = cepless::kDefaultMaxQueueItems;
  app.add_option("--bind", bind, std::string("listen address (default $") +
                                     cepless::kQueueAddrEnv + " or 127.0.0.1:6480)");
  app.add_option("--max-queue-items", max_items, "per-queue capacity")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    cepless::QueueServer server(max_items);
    server.start(cepless::net::Address::parse(bind));
    std::signal(SIGTERM, on_signal);
    std::signal(SIGINT, on_signal);
    std::cerr << "cepless-queue-server: listening on " << server.address() << '\n';
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  } catch (const std::exception& e) {
    std::cerr << "cepless-queue-server: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
