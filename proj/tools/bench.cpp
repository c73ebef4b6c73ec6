// Experiment driver: throughput, latency and operator-update runs, report
// aggregation, and a one-process launcher for the platform services.
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cepless/bench.hpp"
#include "cepless/canonical.hpp"

namespace fs = std::filesystem;
using namespace cepless;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

fs::path run_path(const fs::path& out, int run, int runs) {
  if (runs == 1) return out;
  return out.parent_path() /
         (out.stem().string() + "-run" + std::to_string(run) + out.extension().string());
}

void write_document(const fs::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << canonical::dump(doc) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

bench::RunMetrics read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return bench::RunMetrics::from_json(canonical::parse(ss.str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CEPless benchmark harness"};
  app.require_subcommand(1);

  // bench run
  auto* run = app.add_subcommand("run", "run an experiment");
  std::string mode = "cepless";
  std::string query = "forward";
  std::string strategy = "hot";
  double rate = 1000;
  double duration = 60;
  double warmup = 5;
  std::size_t in_batch = 1000;
  std::size_t out_batch = 1000;
  long long backoff_ns = 100'000;
  double update_at = -1;
  int runs = 1;
  std::uint64_t seed = 1;
  std::string out = "bench-metrics.json";
  std::string control;
  bool keep_samples = false;
  run->add_option("--mode", mode, "direct | cepless")->check(CLI::IsMember({"direct", "cepless"}));
  run->add_option("--query", query, "forward | fraud")->check(CLI::IsMember({"forward", "fraud"}));
  run->add_option("--rate", rate, "input events per second");
  run->add_option("--duration", duration, "measured seconds");
  run->add_option("--warmup", warmup, "seconds excluded from metrics");
  run->add_option("--in-batch-size", in_batch, "events per ranged read");
  run->add_option("--out-batch-size", out_batch, "events per push flush");
  run->add_option("--backoff-ns", backoff_ns, "idle back-off increment");
  run->add_option("--update-at", update_at, "issue an operator update at this second");
  run->add_option("--update-strategy", strategy, "hot | redeploy")
      ->check(CLI::IsMember({"hot", "redeploy"}));
  run->add_option("--runs", runs, "repetitions")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "generator seed");
  run->add_option("--out", out, "metrics file (numbered per run when --runs > 1)");
  run->add_option("--control", control,
                  "node manager control address; default runs the services in-process");
  run->add_flag("--keep-samples", keep_samples, "store raw latency samples");

  // bench report
  auto* report = app.add_subcommand("report", "aggregate metrics files into a table");
  std::vector<std::string> files;
  report->add_option("files", files, "metrics files")->required();

  // bench serve-all
  auto* serve = app.add_subcommand("serve-all", "queue server, registry and node manager");
  std::string queue_bind = "127.0.0.1:" + std::to_string(kDefaultQueuePort);
  std::string control_bind = "127.0.0.1:" + std::to_string(kDefaultControlPort);
  std::string root;
  serve->add_option("--queue-bind", queue_bind, "queue server address");
  serve->add_option("--control-bind", control_bind, "node manager control address");
  serve->add_option("--root", root, "state directory (registry, logs)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      bench::RunConfig cfg;
      cfg.mode = bench::mode_from_string(mode);
      cfg.query = bench::query_from_string(query);
      cfg.rate = rate;
      cfg.duration_s = duration;
      cfg.warmup_s = warmup;
      cfg.batching.in_batch_size = in_batch;
      cfg.batching.out_batch_size = out_batch;
      cfg.batching.backoff_increment = std::chrono::nanoseconds(backoff_ns);
      if (update_at >= 0) cfg.update_at_s = update_at;
      cfg.update_strategy = bench::strategy_from_string(strategy);
      cfg.keep_samples = keep_samples;
      bench::Services services;
      if (!control.empty()) {
        services.deployer = std::make_shared<RemoteNodeManager>(net::Address::parse(control));
      }
      std::vector<bench::RunMetrics> all;
      int status = 0;
      for (int i = 0; i < runs; ++i) {
        cfg.seed = seed + static_cast<std::uint64_t>(i);
        const auto path = run_path(out, i, runs);
        try {
          all.push_back(bench::run_experiment(cfg, services));
          write_document(path, all.back().to_json());
        } catch (const bench::RateError& e) {
          write_document(path, e.metrics());
          std::cerr << "bench: run " << i << ": " << e.what() << '\n';
          status = 3;
          continue;
        }
        const auto& m = all.back();
        std::cerr << "bench: run " << i << ": " << m.throughput_total << " ev/s delivered, "
                  << "latency mean " << m.latency_us.mean / 1000 << " ms, loss "
                  << m.accounting.loss << ", duplicates " << m.accounting.duplicates << '\n';
        if (m.update) {
          std::cerr << "bench: update " << m.update->update_time_ms << " ms, downtime "
                    << m.update->downtime_ms << " ms\n";
        }
      }
      std::cout << bench::render_table(bench::aggregate(all));
      return status;
    }
    if (*report) {
      std::vector<bench::RunMetrics> all;
      for (const auto& f : files) all.push_back(read_metrics(f));
      std::cout << bench::render_table(bench::aggregate(all));
      return 0;
    }
    if (*serve) {
      bench::BenchStack::Options options;
      options.queue_bind = net::Address::parse(queue_bind);
      if (!root.empty()) options.root = root;
      bench::BenchStack stack(options);
      stack.manager().start_supervisor();
      ControlServer control_server(stack.manager());
      control_server.start(net::Address::parse(control_bind));
      std::signal(SIGTERM, on_signal);
      std::signal(SIGINT, on_signal);
      std::cerr << "bench: queue server on " << stack.queue_address().to_string()
                << ", node manager on port " << control_server.port() << ", registry at "
                << (stack.root() / "registry").string() << '\n';
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      control_server.stop();
      stack.manager().shutdown();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
