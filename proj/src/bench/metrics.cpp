#include <algorithm>
#include <numeric>

#include "cepless/bench.hpp"

namespace cepless::bench {

Event TransactionGenerator::next(std::uint64_t seq, std::int64_t ts_produced) {
  Event e;
  e.seq = seq;
  e.ts_produced = ts_produced;
  // Keys are inserted in order, so each lands at the end.
  const auto end = e.attrs.end();
  e.attrs.emplace_hint(end, "amount", static_cast<double>(rng_() >> 11) * 0x1.0p-53);
  e.attrs.emplace_hint(end, "cardId", static_cast<std::int64_t>(rng_() % 10000));
  e.attrs.emplace_hint(end, "terminalId", static_cast<std::int64_t>(rng_() % 1000));
  e.attrs.emplace_hint(end, "timestamp", ts_produced);
  return e;
}

std::size_t nearest_rank_index(std::size_t n, unsigned percent) {
  if (n == 0) return 0;
  const std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
  return rank == 0 ? 0 : rank - 1;
}

Summary summarize(std::vector<double> samples) {
  Summary s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  const auto n = samples.size();
  s.count = n;
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  s.min = samples.front();
  s.max = samples.back();
  s.p90 = samples[nearest_rank_index(n, 90)];
  s.p95 = samples[nearest_rank_index(n, 95)];
  s.p99 = samples[nearest_rank_index(n, 99)];
  return s;
}

nlohmann::json Summary::to_json() const {
  return {{"count", count}, {"mean", mean}, {"min", min}, {"max", max},
          {"p90", p90},     {"p95", p95},   {"p99", p99}};
}

Summary Summary::from_json(const nlohmann::json& doc) {
  Summary s;
  s.count = doc.at("count").get<std::size_t>();
  s.mean = doc.at("mean").get<double>();
  s.min = doc.at("min").get<double>();
  s.max = doc.at("max").get<double>();
  s.p90 = doc.at("p90").get<double>();
  s.p95 = doc.at("p95").get<double>();
  s.p99 = doc.at("p99").get<double>();
  return s;
}

double longest_gap_ms(const std::vector<std::chrono::steady_clock::time_point>& times,
                      std::chrono::steady_clock::time_point begin,
                      std::chrono::steady_clock::time_point end) {
  if (end <= begin) return 0;
  auto it = std::lower_bound(times.begin(), times.end(), begin);
  auto last = begin;
  std::chrono::steady_clock::duration longest{0};
  for (; it != times.end() && *it <= end; ++it) {
    longest = std::max(longest, *it - last);
    last = *it;
  }
  longest = std::max(longest, end - last);
  return std::chrono::duration<double, std::milli>(longest).count();
}

std::vector<std::uint64_t> per_second_counts(
    const std::vector<std::chrono::steady_clock::time_point>& times,
    std::chrono::steady_clock::time_point begin, std::size_t bins) {
  std::vector<std::uint64_t> counts(bins, 0);
  for (const auto t : times) {
    if (t < begin) continue;
    const auto bin = static_cast<std::size_t>((t - begin) / std::chrono::seconds(1));
    if (bin < bins) ++counts[bin];
  }
  return counts;
}

Accounting account(std::uint64_t produced, const std::vector<std::uint64_t>& delivered,
                   const std::function<bool(std::uint64_t)>& expected) {
  Accounting a;
  a.produced = produced;
  a.delivered = delivered.size();
  std::vector<std::uint32_t> seen(produced, 0);
  std::uint64_t previous = 0;
  bool first = true;
  for (const auto seq : delivered) {
    if (!first && seq < previous) ++a.out_of_order;
    first = false;
    previous = seq;
    if (seq >= produced || !expected(seq)) {
      ++a.unexpected;
      continue;
    }
    if (seen[seq]++ > 0) ++a.duplicates;
  }
  for (std::uint64_t seq = 0; seq < produced; ++seq) {
    if (!expected(seq)) continue;
    ++a.expected;
    if (seen[seq] == 0) ++a.loss;
  }
  return a;
}

nlohmann::json Accounting::to_json() const {
  return {{"produced", produced},     {"expected", expected},     {"delivered", delivered},
          {"loss", loss},             {"duplicates", duplicates}, {"unexpected", unexpected},
          {"out_of_order", out_of_order}};
}

Accounting Accounting::from_json(const nlohmann::json& doc) {
  Accounting a;
  a.produced = doc.at("produced").get<std::uint64_t>();
  a.expected = doc.at("expected").get<std::uint64_t>();
  a.delivered = doc.at("delivered").get<std::uint64_t>();
  a.loss = doc.at("loss").get<std::uint64_t>();
  a.duplicates = doc.at("duplicates").get<std::uint64_t>();
  a.unexpected = doc.at("unexpected").get<std::uint64_t>();
  a.out_of_order = doc.at("out_of_order").get<std::uint64_t>();
  return a;
}

}  // namespace cepless::bench
