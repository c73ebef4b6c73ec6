#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cepless/batching_client.hpp"
#include "cepless/event.hpp"
#include "cepless/node_manager.hpp"
#include "cepless/queue_server.hpp"
#include "cepless/registry.hpp"

namespace cepless::bench {

/// Synthetic card transactions: amount uniform in [0, 1), seeded.
class TransactionGenerator {
 public:
  explicit TransactionGenerator(std::uint64_t seed) : rng_(seed) {}

  /// Attributes {amount, cardId, terminalId, timestamp}.
  Event next(std::uint64_t seq, std::int64_t ts_produced);

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------- metrics

/// Index of the p-th nearest-rank percentile in a sorted sample of n:
/// ceil(p/100 * n) - 1.
std::size_t nearest_rank_index(std::size_t n, unsigned percent);

struct Summary {
  std::size_t count = 0;
  double mean = 0, min = 0, max = 0, p90 = 0, p95 = 0, p99 = 0;

  nlohmann::json to_json() const;
  static Summary from_json(const nlohmann::json& doc);
};

/// All zero for an empty sample.
Summary summarize(std::vector<double> samples);

/// Longest interval without an output inside [begin, end], counting the
/// edges of the window. `times` must be sorted.
double longest_gap_ms(const std::vector<std::chrono::steady_clock::time_point>& times,
                      std::chrono::steady_clock::time_point begin,
                      std::chrono::steady_clock::time_point end);

/// Counts per one-second bin of [begin, begin + bins s).
std::vector<std::uint64_t> per_second_counts(
    const std::vector<std::chrono::steady_clock::time_point>& times,
    std::chrono::steady_clock::time_point begin, std::size_t bins);

struct Accounting {
  std::uint64_t produced = 0;
  std::uint64_t expected = 0;
  std::uint64_t delivered = 0;
  std::uint64_t loss = 0;          // expected but never seen
  std::uint64_t duplicates = 0;    // extra copies
  std::uint64_t unexpected = 0;    // seen but not expected at all
  std::uint64_t out_of_order = 0;  // deliveries with a smaller seq than the previous one

  nlohmann::json to_json() const;
  static Accounting from_json(const nlohmann::json& doc);
};

/// `expected(seq)` says whether seq must appear exactly once.
Accounting account(std::uint64_t produced, const std::vector<std::uint64_t>& delivered,
                   const std::function<bool(std::uint64_t)>& expected);

// ---------------------------------------------------------------- runs

enum class Mode { kDirect, kCepless };
enum class QueryKind { kForward, kFraud };
enum class UpdateStrategy { kHot, kRedeploy };

std::string_view to_string(Mode m);
std::string_view to_string(QueryKind q);
std::string_view to_string(UpdateStrategy s);
Mode mode_from_string(std::string_view text);
QueryKind query_from_string(std::string_view text);
UpdateStrategy strategy_from_string(std::string_view text);

class RateError : public std::runtime_error {
 public:
  RateError(const std::string& what, nlohmann::json metrics)
      : std::runtime_error(what), metrics_(std::move(metrics)) {}
  const nlohmann::json& metrics() const { return metrics_; }

 private:
  nlohmann::json metrics_;
};

inline constexpr double kFraudThresholdBefore = 0.9;
inline constexpr double kFraudThresholdAfter = 0.5;

struct RunConfig {
  Mode mode = Mode::kCepless;
  QueryKind query = QueryKind::kForward;
  double rate = 1000;  // events per second
  double duration_s = 60;
  double warmup_s = 5;
  BatchingConfig batching;
  std::optional<double> update_at_s;  // since the start of the run
  UpdateStrategy update_strategy = UpdateStrategy::kHot;
  std::uint64_t seed = 1;
  bool keep_samples = false;  // raw latency samples in the metrics document

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc);
};

struct UpdateMetrics {
  std::string strategy;
  double update_time_ms = 0;  // node manager report, or the restart duration
  double downtime_ms = 0;     // longest output gap in [t_update - 1 s, t_update + 5 s]
  double issued_at_s = 0;
  double rate_before = 0;     // outputs per second before the update
  double rate_after = 0;      // outputs per second from t_update + 1 s
  std::optional<UpdateReport> report;

  nlohmann::json to_json() const;
  static UpdateMetrics from_json(const nlohmann::json& doc);
};

struct RunMetrics {
  RunConfig config;
  double achieved_rate = 0;    // producer
  double throughput_total = 0; // outputs in the window / window length
  std::vector<std::uint64_t> per_second;
  Summary throughput;          // over per_second
  Summary latency_us;
  std::vector<double> latency_samples_us;
  double downtime_ms = 0;      // longest output gap in the window
  Accounting accounting;
  std::optional<UpdateMetrics> update;

  nlohmann::json to_json() const;
  static RunMetrics from_json(const nlohmann::json& doc);
};

/// Where cepless mode gets its node manager from.
struct Services {
  std::shared_ptr<Deployer> deployer;
  /// Transport override for an in-process queue store; empty for TCP.
  std::function<TransportFactory(const net::Address&)> transport_for;
};

/// Runs one experiment. Throws RateError when the producer cannot hold
/// 95 % of the target rate.
RunMetrics run_experiment(const RunConfig& config, const Services& services = {});

// ---------------------------------------------------------------- report

struct ReportRow {
  std::string mode;
  std::string query;
  double rate = 0;
  std::size_t runs = 0;
  Summary throughput;
  Summary latency_us;
  double throughput_total_mean = 0;
};

/// One row per (mode, query, rate). Throughput statistics are over all
/// per-second bins of the group's runs, latency over all raw samples (or
/// the run summary when a run kept none and is alone in its group).
std::vector<ReportRow> aggregate(const std::vector<RunMetrics>& runs);
std::string render_table(const std::vector<ReportRow>& rows);

// ---------------------------------------------------------------- stack

/// Locates the reference worker binary: $CEPLESS_OP_BINARY, then next to
/// the running executable, then `fallback`.
std::filesystem::path find_operator_binary(const std::filesystem::path& fallback = {});

/// Publishes forward-op 1.0.0 / 2.0.0 and fraud-op 1.0.0 / 2.0.0
/// (thresholds 0.9 and 0.5) from the reference worker binary.
void publish_bench_operators(Registry& registry, const std::filesystem::path& operator_binary,
                             const std::filesystem::path& scratch);

/// Queue server, registry and node manager in this process.
class BenchStack {
 public:
  struct Options {
    net::Address queue_bind{"127.0.0.1", 0};
    std::filesystem::path root;  // empty: a fresh temporary directory
    std::filesystem::path operator_binary;
    NodeManagerConfig node;
  };

  explicit BenchStack(Options options);
  ~BenchStack();

  BenchStack(const BenchStack&) = delete;
  BenchStack& operator=(const BenchStack&) = delete;

  Services services() const;
  net::Address queue_address() const;
  NodeManager& manager() { return *manager_; }
  Registry& registry() { return *registry_; }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  bool owns_root_ = false;
  QueueServer server_;
  std::shared_ptr<Registry> registry_;
  std::shared_ptr<NodeManager> manager_;
};

}  // namespace cepless::bench
