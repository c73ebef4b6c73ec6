// Node manager daemon and its control client.
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "cepless/canonical.hpp"
#include "cepless/node_manager.hpp"
#include "cepless/process.hpp"
#include "cepless/queue_server.hpp"

namespace fs = std::filesystem;
using namespace cepless;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

void print(const nlohmann::json& doc) { std::cout << canonical::dump(doc) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CEPless node manager"};
  app.require_subcommand(1);
  std::string control = "127.0.0.1:" + std::to_string(kDefaultControlPort);

  auto* serve = app.add_subcommand("serve", "run the node manager");
  std::string queue_addr =
      env_or(kQueueAddrEnv, "127.0.0.1:" + std::to_string(kDefaultQueuePort));
  std::string registry_root = env_or(kRegistryEnv, "");
  std::string log_dir;
  std::size_t batch_size = 1000;
  long long backoff_ns = 100'000;
  serve->add_option("--bind", control, "control address");
  serve->add_option("--queue-addr", queue_addr, "queue server address ($CEPLESS_QUEUE_ADDR)");
  serve->add_option("--registry-root", registry_root, "registry directory ($CEPLESS_REGISTRY)");
  serve->add_option("--log-dir", log_dir, "worker logs (default <registry-root>/../logs)");
  serve->add_option("--batch-size", batch_size, "worker ranged-read size");
  serve->add_option("--backoff-ns", backoff_ns, "worker idle back-off increment");

  std::string name;
  std::string version;
  std::string instance;
  auto* deploy = app.add_subcommand("deploy", "deploy an operator");
  deploy->add_option("--control", control, "node manager address");
  deploy->add_option("name", name)->required();
  deploy->add_option("--version", version, "default: latest");
  auto* update = app.add_subcommand("update", "swap an instance to another version");
  update->add_option("--control", control, "node manager address");
  update->add_option("instance", instance)->required();
  update->add_option("version", version)->required();
  auto* remove = app.add_subcommand("remove", "stop an instance");
  remove->add_option("--control", control, "node manager address");
  remove->add_option("instance", instance)->required();
  auto* status = app.add_subcommand("status", "show one instance");
  status->add_option("--control", control, "node manager address");
  status->add_option("instance", instance)->required();
  auto* list = app.add_subcommand("list", "show every instance");
  list->add_option("--control", control, "node manager address");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      if (registry_root.empty()) {
        std::cerr << "cepless-node-manager: --registry-root or $" << kRegistryEnv
                  << " is required\n";
        return 2;
      }
      NodeManagerConfig config;
      config.queue_address = net::Address::parse(queue_addr);
      config.batch_size = batch_size;
      config.backoff_increment = std::chrono::nanoseconds(backoff_ns);
      const fs::path logs =
          log_dir.empty() ? fs::path(registry_root).parent_path() / "logs" : fs::path(log_dir);
      auto manager = std::make_shared<NodeManager>(
          config, std::make_shared<Registry>(registry_root),
          std::make_shared<PosixProcessBackend>(logs));
      manager->start_supervisor();
      ControlServer server(*manager);
      server.start(net::Address::parse(control));
      std::signal(SIGTERM, on_signal);
      std::signal(SIGINT, on_signal);
      std::cerr << "cepless-node-manager: control on port " << server.port() << ", queues at "
                << queue_addr << '\n';
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      manager->shutdown();
      return 0;
    }
    RemoteNodeManager remote(net::Address::parse(control));
    if (*deploy) {
      print(remote.deploy(name, version.empty() ? std::nullopt
                                                : std::optional<std::string>(version))
                .to_json());
    } else if (*update) {
      print(remote.update(instance, version).to_json());
    } else if (*remove) {
      remote.remove(instance);
    } else if (*status) {
      print(remote.status(instance).to_json());
    } else if (*list) {
      auto doc = nlohmann::json::array();
      for (const auto& h : remote.list()) doc.push_back(h.to_json());
      print(doc);
    }
  } catch (const std::exception& e) {
    std::cerr << "cepless-node-manager: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
