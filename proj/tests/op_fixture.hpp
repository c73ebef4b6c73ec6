#pragma once

#include <filesystem>
#include <fstream>
#include <memory>

#include "cepless/canonical.hpp"
#include "cepless/node_manager.hpp"
#include "cepless/operators.hpp"
#include "cepless/queue_server.hpp"
#include "cepless/registry.hpp"
#include "test_util.hpp"

namespace testing_util {

inline std::filesystem::path operator_binary() { return CEPLESS_OP_PATH; }

/// Publishes the reference worker with `spec` as <name>:<version>.
inline void publish_operator(cepless::Registry& registry, const std::filesystem::path& scratch,
                             const std::string& name, const std::string& version,
                             const cepless::OperatorSpec& spec) {
  namespace fs = std::filesystem;
  const fs::path pkg = scratch / ("pkg-" + name + "-" + version);
  fs::create_directories(pkg);
  fs::copy_file(operator_binary(), pkg / "cepless-op", fs::copy_options::overwrite_existing);
  std::ofstream(pkg / "operator.json") << cepless::canonical::dump(spec.to_json());
  cepless::OperatorDescriptor d;
  d.name = name;
  d.version = version;
  d.command = {"{package}/cepless-op", "--config", "{package}/operator.json"};
  registry.publish(d, pkg);
}

inline cepless::OperatorSpec forward_spec() { return {}; }

inline cepless::OperatorSpec fraud_spec(double threshold) {
  cepless::OperatorSpec s;
  s.kind = "fraud";
  s.threshold = threshold;
  return s;
}

/// Queue server, registry and node manager on ephemeral resources.
class Stack {
 public:
  explicit Stack(cepless::NodeManagerConfig cfg = {}) {
    server.start(cepless::net::Address{"127.0.0.1", 0});
    registry = std::make_shared<cepless::Registry>(dir.path() / "registry");
    cfg.queue_address = address();
    manager = std::make_unique<cepless::NodeManager>(
        cfg, registry, std::make_shared<cepless::PosixProcessBackend>(dir.path() / "logs"));
  }
  ~Stack() {
    manager.reset();
    server.stop();
  }

  cepless::net::Address address() const { return {"127.0.0.1", server.port()}; }
  void publish(const std::string& name, const std::string& version,
               const cepless::OperatorSpec& spec) {
    publish_operator(*registry, dir.path(), name, version, spec);
  }
  cepless::QueueConnection connection() const { return cepless::QueueConnection(address()); }

  TempDir dir;
  cepless::QueueServer server;
  std::shared_ptr<cepless::Registry> registry;
  std::unique_ptr<cepless::NodeManager> manager;
};

}  // namespace testing_util

namespace testing_util {

/// Transaction-shaped event with a uniform amount in [0, 1).
inline cepless::Event transaction(std::mt19937_64& rng, std::uint64_t seq) {
  cepless::Event e;
  e.seq = seq;
  e.ts_produced = static_cast<std::int64_t>(seq);
  e.attrs["amount"] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  e.attrs["cardId"] = static_cast<std::int64_t>(rng() % 10000);
  e.attrs["terminalId"] = static_cast<std::int64_t>(rng() % 1000);
  return e;
}

/// Non-owning Deployer pointer for interfaces that take shared ownership.
inline std::shared_ptr<cepless::Deployer> borrow(cepless::Deployer& d) {
  return std::shared_ptr<cepless::Deployer>(std::shared_ptr<cepless::Deployer>{}, &d);
}

}  // namespace testing_util
