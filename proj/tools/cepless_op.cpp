// Reference operator worker: runs the forward or fraud operator against the
// queues named in the CEPLESS_* environment.
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cepless/canonical.hpp"
#include "cepless/operators.hpp"
#include "cepless/worker.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CEPless reference operator worker"};
  std::string config_path;
  std::string kind;
  double threshold = cepless::kDefaultFraudThreshold;
  long delay_us = -1;
  app.add_option("--config", config_path, "operator.json with kind/threshold/delay_us");
  app.add_option("--op", kind, "forward | fraud (overrides --config)");
  app.add_option("--threshold", threshold, "fraud threshold");
  app.add_option("--delay-us", delay_us, "artificial per-event cost");
  CLI11_PARSE(app, argc, argv);

  cepless::OperatorSpec spec;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot read " + config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      spec = cepless::OperatorSpec::from_json(cepless::canonical::parse(ss.str()));
    }
    if (!kind.empty()) spec.kind = kind;
    if (app.count("--threshold") > 0) spec.threshold = threshold;
    if (delay_us >= 0) spec.delay_per_event = std::chrono::microseconds(delay_us);
    spec = cepless::OperatorSpec::from_json(spec.to_json());
  } catch (const std::exception& e) {
    std::cerr << "cepless-op: " << e.what() << '\n';
    return 2;
  }
  if (spec.fail_on_boot) {
    std::cerr << "cepless-op: configured to fail on boot\n";
    return 3;
  }

  cepless::OperatorContext ctx;
  try {
    ctx = cepless::OperatorContext::from_process_env();
  } catch (const cepless::ContextError& e) {
    std::cerr << "cepless-op: " << e.what() << '\n';
    return 2;
  }

  std::signal(SIGTERM, on_signal);
  std::signal(SIGINT, on_signal);
  try {
    const auto result = cepless::run_worker(ctx, cepless::make_operator(spec),
                                            cepless::tcp_transport_factory(ctx.queue_address),
                                            &g_stop);
    std::cerr << "cepless-op: exiting after " << result.events_in << " events in, "
              << result.events_out << " out, " << result.dead_lettered << " dead-lettered"
              << (result.drained ? " (drained)" : "") << '\n';
  } catch (const std::exception& e) {
    std::cerr << "cepless-op: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
