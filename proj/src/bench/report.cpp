#include <cstdio>
#include <map>
#include <tuple>

#include "cepless/bench.hpp"

namespace cepless::bench {

std::vector<ReportRow> aggregate(const std::vector<RunMetrics>& runs) {
  struct Group {
    std::vector<const RunMetrics*> runs;
  };
  std::map<std::tuple<std::string, std::string, double>, Group> groups;
  for (const auto& r : runs) {
    groups[{std::string(to_string(r.config.mode)), std::string(to_string(r.config.query)),
            r.config.rate}]
        .runs.push_back(&r);
  }
  std::vector<ReportRow> rows;
  for (const auto& [key, group] : groups) {
    ReportRow row;
    std::tie(row.mode, row.query, row.rate) = key;
    row.runs = group.runs.size();
    std::vector<double> bins;
    std::vector<double> latencies;
    bool all_samples = true;
    double total = 0;
    for (const auto* r : group.runs) {
      bins.insert(bins.end(), r->per_second.begin(), r->per_second.end());
      latencies.insert(latencies.end(), r->latency_samples_us.begin(),
                       r->latency_samples_us.end());
      all_samples &= r->latency_samples_us.size() == r->latency_us.count;
      total += r->throughput_total;
    }
    row.throughput = summarize(bins);
    if (all_samples) {
      row.latency_us = summarize(latencies);
    } else if (group.runs.size() == 1) {
      row.latency_us = group.runs.front()->latency_us;
    } else {
      // Without raw samples only the mean and extremes combine exactly.
      double weighted = 0;
      std::size_t count = 0;
      row.latency_us.min = group.runs.front()->latency_us.min;
      row.latency_us.max = group.runs.front()->latency_us.max;
      for (const auto* r : group.runs) {
        weighted += r->latency_us.mean * static_cast<double>(r->latency_us.count);
        count += r->latency_us.count;
        row.latency_us.min = std::min(row.latency_us.min, r->latency_us.min);
        row.latency_us.max = std::max(row.latency_us.max, r->latency_us.max);
      }
      row.latency_us.count = count;
      row.latency_us.mean = count ? weighted / static_cast<double>(count) : 0;
      row.latency_us.p90 = row.latency_us.p95 = row.latency_us.p99 = -1;
    }
    row.throughput_total_mean = total / static_cast<double>(group.runs.size());
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string cell(double value, const char* format) {
  if (value < 0) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

}  // namespace

std::string render_table(const std::vector<ReportRow>& rows) {
  // Throughput in events per second, latency in milliseconds.
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line,
                "%-8s %-8s %9s %4s | %9s %9s %9s %9s %9s %9s %9s | %9s %9s %9s %9s %9s %9s\n",
                "mode", "query", "rate", "runs", "total/s", "mean/s", "min/s", "max/s", "p90/s",
                "p95/s", "p99/s", "mean ms", "min ms", "max ms", "p90 ms", "p95 ms", "p99 ms");
  out += line;
  for (const auto& r : rows) {
    const auto& t = r.throughput;
    const auto& l = r.latency_us;
    const auto ms = [](double us) { return us < 0 ? us : us / 1000; };
    std::snprintf(line, sizeof line,
                  "%-8s %-8s %9.0f %4zu | %9.1f %9.1f %9.0f %9.0f %9.0f %9.0f %9.0f | "
                  "%9s %9s %9s %9s %9s %9s\n",
                  r.mode.c_str(), r.query.c_str(), r.rate, r.runs, r.throughput_total_mean, t.mean,
                  t.min, t.max, t.p90, t.p95, t.p99, cell(ms(l.mean), "%.3f").c_str(),
                  cell(ms(l.min), "%.3f").c_str(), cell(ms(l.max), "%.3f").c_str(),
                  cell(ms(l.p90), "%.3f").c_str(), cell(ms(l.p95), "%.3f").c_str(),
                  cell(ms(l.p99), "%.3f").c_str());
    out += line;
  }
  return out;
}

}  // namespace cepless::bench
