#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <random>

#include "cepless/bench.hpp"
#include "cepless/canonical.hpp"

using namespace cepless;
using namespace cepless::bench;
using Steady = std::chrono::steady_clock;
using std::chrono::milliseconds;

namespace {

// Smallest 1-based rank k with k / n >= p / 100, by linear search.
std::size_t brute_rank_index(std::size_t n, unsigned p) {
  for (std::size_t k = 1; k <= n; ++k) {
    if (k * 100 >= static_cast<std::size_t>(p) * n) return k - 1;
  }
  return n - 1;
}

double brute_gap_ms(const std::vector<Steady::time_point>& times, Steady::time_point begin,
                    Steady::time_point end) {
  std::vector<Steady::time_point> points{begin};
  for (const auto t : times) {
    if (t >= begin && t <= end) points.push_back(t);
  }
  points.push_back(end);
  Steady::duration longest{0};
  for (std::size_t i = 1; i < points.size(); ++i) {
    longest = std::max(longest, points[i] - points[i - 1]);
  }
  return std::chrono::duration<double, std::milli>(longest).count();
}

void expect_summary_eq(const Summary& a, const Summary& b) {
  EXPECT_EQ(a.count, b.count);
  EXPECT_DOUBLE_EQ(a.mean, b.mean);
  EXPECT_EQ(a.min, b.min);
  EXPECT_EQ(a.max, b.max);
  EXPECT_EQ(a.p90, b.p90);
  EXPECT_EQ(a.p95, b.p95);
  EXPECT_EQ(a.p99, b.p99);
}

RunMetrics synthetic_run(std::mt19937_64& rng, double rate) {
  RunMetrics m;
  m.config.rate = rate;
  m.config.keep_samples = true;
  const std::size_t bins = 5 + rng() % 10;
  for (std::size_t i = 0; i < bins; ++i) m.per_second.push_back(900 + rng() % 200);
  std::vector<double> per_second(m.per_second.begin(), m.per_second.end());
  m.throughput = summarize(per_second);
  const std::size_t n = 1 + rng() % 500;
  for (std::size_t i = 0; i < n; ++i) {
    m.latency_samples_us.push_back(static_cast<double>(rng() % 100000) / 7.0);
  }
  m.latency_us = summarize(m.latency_samples_us);
  m.throughput_total = 1000;
  return m;
}

void use_reference_worker() {
#ifdef CEPLESS_OP_PATH
  ::setenv("CEPLESS_OP_BINARY", CEPLESS_OP_PATH, 0);
#endif
}

}  // namespace

TEST(Percentiles, NearestRankMatchesBruteForce) {
  for (std::size_t n = 1; n <= 300; ++n) {
    for (unsigned p = 1; p <= 100; ++p) {
      ASSERT_EQ(nearest_rank_index(n, p), brute_rank_index(n, p)) << "n=" << n << " p=" << p;
    }
  }
  EXPECT_EQ(nearest_rank_index(0, 99), 0u);
}

TEST(Percentiles, SummaryMatchesOracle) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 200; ++round) {
    std::vector<double> xs(1 + rng() % 1000);
    for (auto& x : xs) x = static_cast<double>(rng() % 100000) / 10.0;
    const auto s = summarize(xs);
    auto sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(s.count, xs.size());
    EXPECT_NEAR(s.mean, std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size(), 1e-9);
    EXPECT_EQ(s.min, sorted.front());
    EXPECT_EQ(s.max, sorted.back());
    EXPECT_EQ(s.p90, sorted[brute_rank_index(xs.size(), 90)]);
    EXPECT_EQ(s.p95, sorted[brute_rank_index(xs.size(), 95)]);
    EXPECT_EQ(s.p99, sorted[brute_rank_index(xs.size(), 99)]);
  }
  expect_summary_eq(summarize({}), Summary{});
}

TEST(Percentiles, SmallSamples) {
  const auto s = summarize({5, 1, 4, 2, 3});
  EXPECT_EQ(s.p90, 5);
  EXPECT_EQ(s.p99, 5);
  EXPECT_EQ(summarize({7}).p90, 7);
}

TEST(Gaps, LongestGapCountsWindowEdges) {
  const auto t0 = Steady::time_point{} + std::chrono::hours(1);
  const std::vector<Steady::time_point> times{t0 + milliseconds(100), t0 + milliseconds(150),
                                             t0 + milliseconds(900)};
  EXPECT_DOUBLE_EQ(longest_gap_ms(times, t0, t0 + milliseconds(1000)), 750);
  EXPECT_DOUBLE_EQ(longest_gap_ms({}, t0, t0 + milliseconds(400)), 400);
  EXPECT_DOUBLE_EQ(longest_gap_ms(times, t0 + milliseconds(120), t0 + milliseconds(140)), 20);
  EXPECT_DOUBLE_EQ(longest_gap_ms(times, t0 + milliseconds(5), t0), 0);
}

TEST(Gaps, LongestGapMatchesOracle) {
  std::mt19937_64 rng(4);
  const auto t0 = Steady::time_point{} + std::chrono::hours(1);
  for (int round = 0; round < 300; ++round) {
    std::vector<Steady::time_point> times(rng() % 50);
    for (auto& t : times) t = t0 + std::chrono::microseconds(rng() % 2'000'000);
    std::sort(times.begin(), times.end());
    const auto begin = t0 + std::chrono::microseconds(rng() % 1'000'000);
    const auto end = begin + std::chrono::microseconds(rng() % 1'500'000);
    ASSERT_DOUBLE_EQ(longest_gap_ms(times, begin, end), brute_gap_ms(times, begin, end));
  }
}

TEST(Throughput, PerSecondBins) {
  std::mt19937_64 rng(5);
  const auto t0 = Steady::time_point{} + std::chrono::hours(1);
  std::vector<Steady::time_point> times(5000);
  for (auto& t : times) {
    t = t0 + std::chrono::microseconds(static_cast<std::int64_t>(rng() % 12'000'000) - 1'000'000);
  }
  const auto counts = per_second_counts(times, t0, 10);
  ASSERT_EQ(counts.size(), 10u);
  for (std::size_t b = 0; b < 10; ++b) {
    const auto lo = t0 + std::chrono::seconds(b);
    const auto hi = lo + std::chrono::seconds(1);
    const auto expected = std::count_if(times.begin(), times.end(),
                                        [&](auto t) { return t >= lo && t < hi; });
    EXPECT_EQ(counts[b], static_cast<std::uint64_t>(expected));
  }
}

TEST(Accounting, CountsEveryKindOfDeviation) {
  const auto a = account(10, {0, 1, 1, 3, 12, 2}, [](std::uint64_t) { return true; });
  EXPECT_EQ(a.produced, 10u);
  EXPECT_EQ(a.expected, 10u);
  EXPECT_EQ(a.delivered, 6u);
  EXPECT_EQ(a.loss, 6u);
  EXPECT_EQ(a.duplicates, 1u);
  EXPECT_EQ(a.unexpected, 1u);
  EXPECT_EQ(a.out_of_order, 1u);

  const auto even = account(6, {0, 2, 4, 5}, [](std::uint64_t s) { return s % 2 == 0; });
  EXPECT_EQ(even.expected, 3u);
  EXPECT_EQ(even.loss, 0u);
  EXPECT_EQ(even.unexpected, 1u);
}

TEST(Accounting, RandomDeliveriesMatchOracle) {
  std::mt19937_64 rng(6);
  for (int round = 0; round < 200; ++round) {
    const std::uint64_t produced = rng() % 200;
    std::vector<std::uint64_t> delivered(rng() % 300);
    for (auto& s : delivered) s = rng() % (produced + 20);
    const auto a = account(produced, delivered, [](std::uint64_t s) { return s % 3 != 1; });
    std::uint64_t expected = 0, loss = 0, dup = 0, unexpected = 0;
    for (std::uint64_t s = 0; s < produced; ++s) {
      if (s % 3 == 1) continue;
      ++expected;
      const auto c = std::count(delivered.begin(), delivered.end(), s);
      if (c == 0) ++loss;
      if (c > 1) dup += static_cast<std::uint64_t>(c - 1);
    }
    for (const auto s : delivered) unexpected += (s >= produced || s % 3 == 1);
    EXPECT_EQ(a.expected, expected);
    EXPECT_EQ(a.loss, loss);
    EXPECT_EQ(a.duplicates, dup);
    EXPECT_EQ(a.unexpected, unexpected);
  }
}

TEST(Report, EmptyInputGivesNoRows) {
  EXPECT_TRUE(aggregate({}).empty());
  EXPECT_NE(render_table({}).find("mode"), std::string::npos);
}

TEST(Report, SingleRunEqualsItsSummary) {
  std::mt19937_64 rng(7);
  const auto run = synthetic_run(rng, 1000);
  const auto rows = aggregate({run});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, 1u);
  expect_summary_eq(rows[0].throughput, run.throughput);
  expect_summary_eq(rows[0].latency_us, run.latency_us);

  auto without_samples = run;
  without_samples.latency_samples_us.clear();
  expect_summary_eq(aggregate({without_samples})[0].latency_us, run.latency_us);
}

TEST(Report, ThirtyRunsEqualRecomputationFromRawSamples) {
  std::mt19937_64 rng(8);
  std::vector<RunMetrics> runs;
  std::vector<double> bins;
  std::vector<double> latencies;
  for (int i = 0; i < 30; ++i) {
    runs.push_back(synthetic_run(rng, 10000));
    bins.insert(bins.end(), runs.back().per_second.begin(), runs.back().per_second.end());
    latencies.insert(latencies.end(), runs.back().latency_samples_us.begin(),
                     runs.back().latency_samples_us.end());
  }
  runs.push_back(synthetic_run(rng, 1000));  // a separate group
  const auto rows = aggregate(runs);
  ASSERT_EQ(rows.size(), 2u);
  const auto& row = rows[0].rate == 10000 ? rows[0] : rows[1];
  EXPECT_EQ(row.runs, 30u);
  expect_summary_eq(row.throughput, summarize(bins));
  expect_summary_eq(row.latency_us, summarize(latencies));
  const auto table = render_table(rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
}

TEST(Report, RunsWithoutSamplesCombineMeanAndExtremesOnly) {
  std::mt19937_64 rng(9);
  auto a = synthetic_run(rng, 1000);
  auto b = synthetic_run(rng, 1000);
  a.latency_samples_us.clear();
  b.latency_samples_us.clear();
  const auto row = aggregate({a, b}).at(0);
  EXPECT_EQ(row.latency_us.count, a.latency_us.count + b.latency_us.count);
  EXPECT_NEAR(row.latency_us.mean,
              (a.latency_us.mean * a.latency_us.count + b.latency_us.mean * b.latency_us.count) /
                  (a.latency_us.count + b.latency_us.count),
              1e-9);
  EXPECT_EQ(row.latency_us.p99, -1);
  EXPECT_NE(render_table({row}).find(" - "), std::string::npos);
}

TEST(Metrics, JsonRoundTrip) {
  std::mt19937_64 rng(10);
  auto m = synthetic_run(rng, 1000);
  m.config.mode = Mode::kCepless;
  m.config.query = QueryKind::kFraud;
  m.config.update_at_s = 12.5;
  m.config.update_strategy = UpdateStrategy::kRedeploy;
  m.config.batching.in_batch_size = 77;
  m.achieved_rate = 999.5;
  m.downtime_ms = 12.25;
  m.accounting = account(5, {0, 1, 1}, [](std::uint64_t) { return true; });
  UpdateMetrics u;
  u.strategy = "redeploy";
  u.update_time_ms = 812.5;
  u.downtime_ms = 900;
  u.issued_at_s = 12.5;
  u.rate_before = 100;
  u.rate_after = 500;
  m.update = u;
  const std::string text = canonical::dump(m.to_json());
  const auto back = RunMetrics::from_json(canonical::parse(text));
  EXPECT_EQ(canonical::dump(back.to_json()), text);
  EXPECT_EQ(back.config.batching.in_batch_size, 77u);
}

TEST(Generator, DeterministicPerSeed) {
  TransactionGenerator a(42), b(42), c(43);
  bool differs = false;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto ea = a.next(i, 5);
    const auto eb = b.next(i, 5);
    const auto ec = c.next(i, 5);
    ASSERT_EQ(ea, eb);
    differs |= !(ea == ec);
    const double amount = std::get<double>(ea.attrs.at("amount"));
    EXPECT_GE(amount, 0.0);
    EXPECT_LT(amount, 1.0);
    EXPECT_LT(std::get<std::int64_t>(ea.attrs.at("cardId")), 10000);
    EXPECT_LT(std::get<std::int64_t>(ea.attrs.at("terminalId")), 1000);
    EXPECT_EQ(std::get<std::int64_t>(ea.attrs.at("timestamp")), 5);
  }
  EXPECT_TRUE(differs);
}

TEST(Generator, AmountsAreUniform) {
  TransactionGenerator g(1);
  int above_09 = 0, above_05 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double a = std::get<double>(g.next(i, 0).attrs.at("amount"));
    above_09 += a > 0.9;
    above_05 += a > 0.5;
  }
  EXPECT_NEAR(above_09 / double(n), 0.1, 0.005);
  EXPECT_NEAR(above_05 / double(n), 0.5, 0.01);
}

TEST(Names, ParseAndPrint) {
  for (auto m : {Mode::kDirect, Mode::kCepless}) EXPECT_EQ(mode_from_string(to_string(m)), m);
  for (auto q : {QueryKind::kForward, QueryKind::kFraud}) {
    EXPECT_EQ(query_from_string(to_string(q)), q);
  }
  for (auto s : {UpdateStrategy::kHot, UpdateStrategy::kRedeploy}) {
    EXPECT_EQ(strategy_from_string(to_string(s)), s);
  }
  EXPECT_THROW(mode_from_string("fast"), std::invalid_argument);
}

TEST(Experiment, ShortDirectRunLosesNothing) {
  RunConfig cfg;
  cfg.mode = Mode::kDirect;
  cfg.rate = 2000;
  cfg.duration_s = 2;
  cfg.warmup_s = 0.5;
  const auto m = run_experiment(cfg);
  EXPECT_EQ(m.accounting.loss, 0u);
  EXPECT_EQ(m.accounting.duplicates, 0u);
  EXPECT_EQ(m.accounting.unexpected, 0u);
  EXPECT_EQ(m.accounting.delivered, m.accounting.produced);
  EXPECT_NEAR(m.throughput_total, 2000, 200);
  EXPECT_EQ(m.per_second.size(), 2u);
  EXPECT_GT(m.latency_us.count, 0u);
}

TEST(Experiment, ShortCeplessFraudRunFiltersExactly) {
  use_reference_worker();
  RunConfig cfg;
  cfg.mode = Mode::kCepless;
  cfg.query = QueryKind::kFraud;
  cfg.rate = 1000;
  cfg.duration_s = 2;
  cfg.warmup_s = 0.5;
  const auto m = run_experiment(cfg);
  EXPECT_EQ(m.accounting.loss, 0u);
  EXPECT_EQ(m.accounting.duplicates, 0u);
  EXPECT_EQ(m.accounting.unexpected, 0u);
  EXPECT_GT(m.accounting.expected, 100u);
  EXPECT_LT(m.accounting.expected, 400u);
}

TEST(Experiment, HotUpdateIsExactlyOnceAndRaisesTheRate) {
  use_reference_worker();
  RunConfig cfg;
  cfg.mode = Mode::kCepless;
  cfg.query = QueryKind::kFraud;
  cfg.rate = 1000;
  cfg.duration_s = 9;
  cfg.warmup_s = 1;
  cfg.update_at_s = 4;
  const auto m = run_experiment(cfg);
  ASSERT_TRUE(m.update.has_value());
  EXPECT_EQ(m.accounting.loss, 0u);
  EXPECT_EQ(m.accounting.duplicates, 0u);
  EXPECT_EQ(m.accounting.unexpected, 0u);
  EXPECT_LT(m.update->update_time_ms, 1000);
  EXPECT_LT(m.update->downtime_ms, 1000);
  // 10 % of amounts pass before, 50 % after.
  const double ratio = m.update->rate_after / m.update->rate_before;
  EXPECT_GT(ratio, 4.0);
  EXPECT_LT(ratio, 6.0);
}

TEST(Experiment, RedeployReplaysEverything) {
  use_reference_worker();
  RunConfig cfg;
  cfg.mode = Mode::kCepless;
  cfg.query = QueryKind::kForward;
  cfg.rate = 1000;
  cfg.duration_s = 4;
  cfg.warmup_s = 0.5;
  cfg.update_at_s = 1.5;
  cfg.update_strategy = UpdateStrategy::kRedeploy;
  const auto m = run_experiment(cfg);
  ASSERT_TRUE(m.update.has_value());
  EXPECT_EQ(m.accounting.loss, 0u);
  EXPECT_EQ(m.accounting.duplicates, 0u);
  EXPECT_GT(m.update->update_time_ms, 0);
  EXPECT_GE(m.update->downtime_ms, m.update->update_time_ms * 0.5);
}
