#include <cstdlib>
#include <fstream>
#include <random>

#include "cepless/bench.hpp"
#include "cepless/canonical.hpp"
#include "cepless/operators.hpp"
#include "cepless/process.hpp"

namespace cepless::bench {

namespace fs = std::filesystem;

fs::path find_operator_binary(const fs::path& fallback) {
  if (const char* env = std::getenv("CEPLESS_OP_BINARY"); env != nullptr && *env != '\0') {
    return env;
  }
  std::error_code ec;
  const auto self = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    for (const auto& candidate : {self.parent_path() / "cepless-op",
                                  self.parent_path().parent_path() / "tools" / "cepless-op"}) {
      if (fs::exists(candidate)) return candidate;
    }
  }
  if (!fallback.empty() && fs::exists(fallback)) return fallback;
  throw std::runtime_error("cannot find the cepless-op binary; set CEPLESS_OP_BINARY");
}

void publish_bench_operators(Registry& registry, const fs::path& operator_binary,
                             const fs::path& scratch) {
  struct Entry {
    const char* name;
    const char* version;
    OperatorSpec spec;
  };
  OperatorSpec forward;
  OperatorSpec fraud_before;
  fraud_before.kind = "fraud";
  fraud_before.threshold = kFraudThresholdBefore;
  OperatorSpec fraud_after = fraud_before;
  fraud_after.threshold = kFraudThresholdAfter;
  const Entry entries[] = {{"forward-op", "1.0.0", forward},
                           {"forward-op", "2.0.0", forward},
                           {"fraud-op", "1.0.0", fraud_before},
                           {"fraud-op", "2.0.0", fraud_after}};
  for (const auto& e : entries) {
    const fs::path pkg = scratch / (std::string(e.name) + "-" + e.version);
    fs::create_directories(pkg);
    fs::copy_file(operator_binary, pkg / "cepless-op", fs::copy_options::overwrite_existing);
    std::ofstream(pkg / "operator.json") << canonical::dump(e.spec.to_json());
    OperatorDescriptor d;
    d.name = e.name;
    d.version = e.version;
    d.command = {"{package}/cepless-op", "--config", "{package}/operator.json"};
    registry.publish(d, pkg);
  }
}

BenchStack::BenchStack(Options options) : root_(std::move(options.root)) {
  if (root_.empty()) {
    std::random_device rd;
    root_ = fs::temp_directory_path() / ("cepless-bench-" + std::to_string(rd()));
    owns_root_ = true;
  }
  fs::create_directories(root_);
  server_.start(options.queue_bind);
  registry_ = std::make_shared<Registry>(root_ / "registry");
  const auto binary = options.operator_binary.empty() ? find_operator_binary()
                                                      : options.operator_binary;
  publish_bench_operators(*registry_, binary, root_ / "scratch");
  options.node.queue_address = queue_address();
  manager_ = std::make_shared<NodeManager>(options.node, registry_,
                                           std::make_shared<PosixProcessBackend>(root_ / "logs"));
}

BenchStack::~BenchStack() {
  manager_.reset();
  server_.stop();
  if (owns_root_) {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
}

net::Address BenchStack::queue_address() const { return {"127.0.0.1", server_.port()}; }

Services BenchStack::services() const { return Services{manager_, {}}; }

}  // namespace cepless::bench
