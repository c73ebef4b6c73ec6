// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Long-running (about 15 minutes); registered with ctest under the label
// "acceptance".
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "cepless/bench.hpp"

using namespace cepless;
using namespace cepless::bench;

namespace {

constexpr double kThroughputTolerance = 0.10;
constexpr double kLatencyOverheadMs = 10.0;
constexpr double kLatencyP99Ms = 50.0;
constexpr double kUpdateTimeMs = 1000.0;
constexpr double kUpdateGapMs = 1000.0;
constexpr double kRedeployFactor = 5.0;
constexpr double kParityDuration = 60;
constexpr double kWarmup = 5;
constexpr int kParityRuns = 3;

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass &= ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

void report(const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << '\n';
  for (const auto& d : o.details) std::cout << "    " << d << '\n';
  std::cout.flush();
}

bool within(double value, double target, double tolerance) {
  return std::fabs(value - target) <= tolerance * target;
}

RunConfig forward_config(Mode mode, double rate, double duration) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.query = QueryKind::kForward;
  cfg.rate = rate;
  cfg.duration_s = duration;
  cfg.warmup_s = kWarmup;
  cfg.keep_samples = true;
  return cfg;
}

std::string describe(const RunMetrics& m) {
  return fmt("delivered %.1f ev/s, per-second min %.0f max %.0f", m.throughput_total,
             m.throughput.min, m.throughput.max) +
         fmt(", latency mean %.3f ms p99 %.3f ms", m.latency_us.mean / 1000,
             m.latency_us.p99 / 1000) +
         ", loss " + std::to_string(m.accounting.loss) + ", duplicates " +
         std::to_string(m.accounting.duplicates);
}

// Shared between the parity and latency criteria.
std::vector<RunMetrics> g_cepless_10k;

Outcome throughput_parity() {
  Outcome o;
  for (const double rate : {1000.0, 10000.0}) {
    for (int i = 0; i < kParityRuns; ++i) {
      auto cfg = forward_config(Mode::kCepless, rate, kParityDuration);
      cfg.seed = static_cast<std::uint64_t>(i + 1);
      try {
        const auto m = run_experiment(cfg);
        o.check(within(m.throughput_total, rate, kThroughputTolerance) &&
                    m.accounting.loss == 0 && m.accounting.duplicates == 0,
                fmt("%.0f ev/s run %.0f: ", rate, i) + describe(m));
        if (rate == 10000.0) g_cepless_10k.push_back(m);
      } catch (const std::exception& e) {
        o.check(false, fmt("%.0f ev/s run %.0f: ", rate, i) + e.what());
      }
    }
  }
  return o;
}

Outcome latency_overhead() {
  Outcome o;
  if (g_cepless_10k.empty()) {
    o.check(false, "no cepless run at 10000 ev/s completed");
    return o;
  }
  try {
    const auto direct = run_experiment(forward_config(Mode::kDirect, 10000, kParityDuration));
    o.note("direct: " + describe(direct));
    auto rows = aggregate(g_cepless_10k);
    const auto& cepless = rows.at(0).latency_us;
    const double overhead_ms = (cepless.mean - direct.latency_us.mean) / 1000;
    o.check(overhead_ms <= kLatencyOverheadMs,
            fmt("mean overhead %.3f ms (cepless %.3f ms over %.0f runs)", overhead_ms,
                cepless.mean / 1000, static_cast<double>(g_cepless_10k.size())));
    o.check(cepless.p99 / 1000 <= kLatencyP99Ms, fmt("cepless p99 %.3f ms", cepless.p99 / 1000));
  } catch (const std::exception& e) {
    o.check(false, std::string("direct run: ") + e.what());
  }
  return o;
}

// Highest rate from the ladder that the direct pipeline holds.
double direct_sustained_rate(Outcome& o) {
  for (const double rate : {100000.0, 50000.0, 20000.0, 10000.0}) {
    try {
      const auto m = run_experiment(forward_config(Mode::kDirect, rate, 20));
      const bool ok = within(m.throughput_total, rate, kThroughputTolerance);
      o.note(fmt("direct check at %.0f ev/s: ", rate) + describe(m) + (ok ? "" : " (not held)"));
      if (ok) return rate;
    } catch (const std::exception& e) {
      o.note(fmt("direct check at %.0f ev/s: ", rate) + e.what());
    }
  }
  return 0;
}

Outcome high_rate() {
  Outcome o;
  const double rate = direct_sustained_rate(o);
  if (rate == 0) {
    o.check(false, "direct mode holds none of the candidate rates");
    return o;
  }
  auto cfg = forward_config(Mode::kCepless, rate, kParityDuration);
  cfg.batching.in_batch_size = 10000;
  try {
    const auto m = run_experiment(cfg);
    o.check(within(m.throughput_total, rate, kThroughputTolerance) && m.accounting.loss == 0,
            fmt("cepless at %.0f ev/s, in_batch_size 10000: ", rate) + describe(m));
  } catch (const std::exception& e) {
    o.check(false, fmt("cepless at %.0f ev/s: ", rate) + e.what());
  }
  return o;
}

RunConfig update_config(UpdateStrategy strategy) {
  RunConfig cfg;
  cfg.mode = Mode::kCepless;
  cfg.query = QueryKind::kFraud;
  cfg.rate = 1000;
  cfg.duration_s = 20;
  cfg.warmup_s = 2;
  cfg.update_at_s = 12;
  cfg.update_strategy = strategy;
  return cfg;
}

Outcome hot_update() {
  Outcome o;
  double hot_downtime = -1;
  try {
    const auto m = run_experiment(update_config(UpdateStrategy::kHot));
    const auto& u = *m.update;
    hot_downtime = u.downtime_ms;
    o.check(u.update_time_ms < kUpdateTimeMs, fmt("update time %.1f ms", u.update_time_ms));
    o.check(u.downtime_ms < kUpdateGapMs, fmt("longest output gap %.1f ms", u.downtime_ms));
    o.check(m.accounting.loss == 0, "loss " + std::to_string(m.accounting.loss));
    o.check(m.accounting.duplicates == 0,
            "duplicates " + std::to_string(m.accounting.duplicates) + ", unexpected " +
                std::to_string(m.accounting.unexpected));
    o.note(fmt("output rate %.1f/s before, %.1f/s after (ratio %.2f)", u.rate_before,
               u.rate_after, u.rate_before > 0 ? u.rate_after / u.rate_before : 0));
  } catch (const std::exception& e) {
    o.check(false, std::string("hot update run: ") + e.what());
  }
  try {
    const auto m = run_experiment(update_config(UpdateStrategy::kRedeploy));
    const auto& u = *m.update;
    o.note(fmt("redeploy: restart %.1f ms, longest output gap %.1f ms", u.update_time_ms,
               u.downtime_ms));
    if (hot_downtime >= 0) {
      o.check(u.downtime_ms >= kRedeployFactor * hot_downtime,
              fmt("redeploy gap / hot gap = %.2f (need >= %.0f)",
                  hot_downtime > 0 ? u.downtime_ms / hot_downtime : INFINITY, kRedeployFactor));
    }
  } catch (const std::exception& e) {
    o.check(false, std::string("redeploy run: ") + e.what());
  }
  return o;
}

Outcome property_suites() {
  struct Suite {
    const char* what;
    const char* binary;
    const char* filter;
  };
  const Suite suites[] = {
      {"batching equivalence, backoff progression", TEST_BATCHING_CLIENT,
       "BatchingClient.BatchingEquivalence:LinearBackoff.ProgressionCapAndReset"},
      {"queue FIFO/exactly-once schedules, pipelined ordering", TEST_QUEUE_SERVER,
       "QueueStore.SingleConsumerExactlyOnceSchedules:QueueStore.RandomCommandsMatchModel:"
       "QueueServerTest.PipelinedOrder:QueueServerTest.RandomPipelinesMatchSequentialExecution"},
      {"canonical encoding round trip and injectivity", TEST_EVENT, "EventProperties.*"},
      {"registry restart reconstruction", TEST_REGISTRY,
       "RegistryTest.StateIsReconstructedFromTheStore"},
      {"nearest-rank percentiles", TEST_BENCH, "Percentiles.*"},
  };
  Outcome o;
  for (const auto& s : suites) {
    const std::string cmd = std::string("'") + s.binary + "' --gtest_brief=1 --gtest_filter='" +
                            s.filter + "' > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    o.check(status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0, s.what);
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  ::setenv("CEPLESS_OP_BINARY", CEPLESS_OP_PATH, 0);
  std::set<std::string> only(argv + 1, argv + argc);
  const auto wanted = [&only](const std::string& name) {
    return only.empty() || only.count(name) > 0;
  };

  bool all = true;
  const auto run = [&](const std::string& name, Outcome (*criterion)()) {
    if (!wanted(name)) return;
    const auto o = criterion();
    report(name, o);
    all &= o.pass;
  };
  run("property-suites", property_suites);
  run("throughput-parity", throughput_parity);
  run("latency-overhead", latency_overhead);
  run("high-rate-batching", high_rate);
  run("hot-update", hot_update);
  return all ? 0 : 1;
}
