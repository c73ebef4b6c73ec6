#include <pthread.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <limits>
#include <mutex>
#include <thread>

#include "cepless/bench.hpp"
#include "cepless/query.hpp"
#include "cepless/udo.hpp"

namespace cepless::bench {

namespace {

using SteadyClock = std::chrono::steady_clock;
using namespace std::chrono_literals;

constexpr const char* kFromVersion = "1.0.0";
constexpr const char* kToVersion = "2.0.0";

SteadyClock::duration seconds(double s) {
  return std::chrono::duration_cast<SteadyClock::duration>(std::chrono::duration<double>(s));
}

std::int64_t wall_micros() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

nlohmann::json batching_to_json(const BatchingConfig& b) {
  return {{"out_batch_size", b.out_batch_size},
          {"in_batch_size", b.in_batch_size},
          {"backoff_ns", b.backoff_increment.count()},
          {"backoff_cap_ns", b.backoff_cap.count()},
          {"send_buffer_limit", b.send_buffer_limit}};
}

BatchingConfig batching_from_json(const nlohmann::json& doc) {
  BatchingConfig b;
  b.out_batch_size = doc.at("out_batch_size").get<std::size_t>();
  b.in_batch_size = doc.at("in_batch_size").get<std::size_t>();
  b.backoff_increment = std::chrono::nanoseconds(doc.at("backoff_ns").get<std::int64_t>());
  b.backoff_cap = std::chrono::nanoseconds(doc.at("backoff_cap_ns").get<std::int64_t>());
  b.send_buffer_limit = doc.at("send_buffer_limit").get<std::size_t>();
  return b;
}

// Built-in pipeline on a consumer thread, fed by the producer through a
// hand-off buffer: the engine without the platform.
class DirectPipeline {
 public:
  explicit DirectPipeline(QueryRunner& runner) : runner_(runner), thread_([this] { loop(); }) {}
  ~DirectPipeline() { close(); }

  void push(const Event& e) {
    bool wake = false;
    {
      std::lock_guard lock(mutex_);
      buffer_.push_back(e);
      wake = waiting_;
    }
    if (wake) cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      if (closed_) return;
      closed_ = true;
    }
    cv_.notify_one();
    thread_.join();
  }

 private:
  void loop() {
    std::deque<Event> batch;
    while (true) {
      {
        std::unique_lock lock(mutex_);
        waiting_ = true;
        cv_.wait(lock, [this] { return closed_ || !buffer_.empty(); });
        waiting_ = false;
        if (buffer_.empty() && closed_) return;
        batch.swap(buffer_);
      }
      for (const auto& e : batch) runner_.push(e);
      batch.clear();
    }
  }

  QueryRunner& runner_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Event> buffer_;
  bool waiting_ = false;
  bool closed_ = false;
  std::thread thread_;
};

QueryGraph build_graph(const RunConfig& cfg) {
  Vertex op;
  op.id = "op";
  if (cfg.mode == Mode::kDirect) {
    op.kind = cfg.query == QueryKind::kForward ? VertexKind::kForward : VertexKind::kFilter;
    op.threshold = kFraudThresholdBefore;
  } else {
    op.kind = VertexKind::kUserDefined;
    op.operator_name = cfg.query == QueryKind::kForward ? "forward-op" : "fraud-op";
    op.version = kFromVersion;
  }
  return QueryGraph::single_operator(op);
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::kDirect ? "direct" : "cepless"; }
std::string_view to_string(QueryKind q) { return q == QueryKind::kForward ? "forward" : "fraud"; }
std::string_view to_string(UpdateStrategy s) {
  return s == UpdateStrategy::kHot ? "hot" : "redeploy";
}

Mode mode_from_string(std::string_view text) {
  if (text == "direct") return Mode::kDirect;
  if (text == "cepless") return Mode::kCepless;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

QueryKind query_from_string(std::string_view text) {
  if (text == "forward") return QueryKind::kForward;
  if (text == "fraud") return QueryKind::kFraud;
  throw std::invalid_argument("unknown query '" + std::string(text) + "'");
}

UpdateStrategy strategy_from_string(std::string_view text) {
  if (text == "hot") return UpdateStrategy::kHot;
  if (text == "redeploy") return UpdateStrategy::kRedeploy;
  throw std::invalid_argument("unknown update strategy '" + std::string(text) + "'");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json doc = {{"mode", to_string(mode)},
                        {"query", to_string(query)},
                        {"rate", rate},
                        {"duration_s", duration_s},
                        {"warmup_s", warmup_s},
                        {"batching", batching_to_json(batching)},
                        {"update_strategy", to_string(update_strategy)},
                        {"seed", seed},
                        {"keep_samples", keep_samples},
                        {"update_at_s", nullptr}};
  if (update_at_s) doc["update_at_s"] = *update_at_s;
  return doc;
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  RunConfig c;
  c.mode = mode_from_string(doc.at("mode").get<std::string>());
  c.query = query_from_string(doc.at("query").get<std::string>());
  c.rate = doc.at("rate").get<double>();
  c.duration_s = doc.at("duration_s").get<double>();
  c.warmup_s = doc.at("warmup_s").get<double>();
  c.batching = batching_from_json(doc.at("batching"));
  c.update_strategy = strategy_from_string(doc.at("update_strategy").get<std::string>());
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.keep_samples = doc.at("keep_samples").get<bool>();
  if (!doc.at("update_at_s").is_null()) c.update_at_s = doc.at("update_at_s").get<double>();
  return c;
}

nlohmann::json UpdateMetrics::to_json() const {
  return {{"strategy", strategy},
          {"update_time_ms", update_time_ms},
          {"downtime_ms", downtime_ms},
          {"issued_at_s", issued_at_s},
          {"rate_before", rate_before},
          {"rate_after", rate_after},
          {"report", report ? report->to_json() : nlohmann::json(nullptr)}};
}

UpdateMetrics UpdateMetrics::from_json(const nlohmann::json& doc) {
  UpdateMetrics u;
  u.strategy = doc.at("strategy").get<std::string>();
  u.update_time_ms = doc.at("update_time_ms").get<double>();
  u.downtime_ms = doc.at("downtime_ms").get<double>();
  u.issued_at_s = doc.at("issued_at_s").get<double>();
  u.rate_before = doc.at("rate_before").get<double>();
  u.rate_after = doc.at("rate_after").get<double>();
  if (!doc.at("report").is_null()) u.report = UpdateReport::from_json(doc.at("report"));
  return u;
}

nlohmann::json RunMetrics::to_json() const {
  nlohmann::json doc = {{"config", config.to_json()},
                        {"achieved_rate", achieved_rate},
                        {"throughput_total", throughput_total},
                        {"per_second", per_second},
                        {"throughput", throughput.to_json()},
                        {"latency_us", latency_us.to_json()},
                        {"downtime_ms", downtime_ms},
                        {"accounting", accounting.to_json()},
                        {"update", update ? update->to_json() : nlohmann::json(nullptr)}};
  if (config.keep_samples) doc["latency_samples_us"] = latency_samples_us;
  return doc;
}

RunMetrics RunMetrics::from_json(const nlohmann::json& doc) {
  RunMetrics m;
  m.config = RunConfig::from_json(doc.at("config"));
  m.achieved_rate = doc.at("achieved_rate").get<double>();
  m.throughput_total = doc.at("throughput_total").get<double>();
  m.per_second = doc.at("per_second").get<std::vector<std::uint64_t>>();
  m.throughput = Summary::from_json(doc.at("throughput"));
  m.latency_us = Summary::from_json(doc.at("latency_us"));
  m.downtime_ms = doc.at("downtime_ms").get<double>();
  m.accounting = Accounting::from_json(doc.at("accounting"));
  if (!doc.at("update").is_null()) m.update = UpdateMetrics::from_json(doc.at("update"));
  if (doc.contains("latency_samples_us")) {
    m.latency_samples_us = doc.at("latency_samples_us").get<std::vector<double>>();
  }
  return m;
}

RunMetrics run_experiment(const RunConfig& cfg, const Services& given) {
  if (cfg.rate <= 0 || cfg.duration_s <= 0 || cfg.warmup_s < 0) {
    throw std::invalid_argument("rate and duration must be positive, warmup non-negative");
  }
  if (cfg.update_at_s && cfg.mode != Mode::kCepless) {
    throw std::invalid_argument("operator updates need cepless mode");
  }
  cfg.batching.validate();

  std::unique_ptr<BenchStack> own_stack;
  Services services = given;
  if (cfg.mode == Mode::kCepless && !services.deployer) {
    BenchStack::Options options;
    options.operator_binary = find_operator_binary();
    options.node.batch_size = cfg.batching.in_batch_size;
    own_stack = std::make_unique<BenchStack>(options);
    services = own_stack->services();
  }

  const auto total = static_cast<std::uint64_t>(std::llround(cfg.rate * (cfg.warmup_s + cfg.duration_s)));
  std::vector<SteadyClock::time_point> send_time(total);
  std::vector<double> amounts(total);
  std::vector<std::uint64_t> out_seq;
  std::vector<SteadyClock::time_point> out_time;
  out_seq.reserve(total + 1024);
  out_time.reserve(total + 1024);

  std::unique_ptr<UdoInterface> udo;
  if (cfg.mode == Mode::kCepless) {
    UdoConfig uc;
    uc.batching = cfg.batching;
    uc.transport_for = services.transport_for;
    udo = std::make_unique<UdoInterface>(services.deployer, uc);
  }
  QueryRunner runner(build_graph(cfg), udo.get(),
                     [&](const Event& e, SteadyClock::time_point received) {
                       out_seq.push_back(e.seq);
                       out_time.push_back(received);
                     });
  runner.start();
  std::unique_ptr<DirectPipeline> direct;
  if (cfg.mode == Mode::kDirect) direct = std::make_unique<DirectPipeline>(runner);

  // Open-loop producer: event i is due at t0 + i / rate; a late producer
  // catches up in a burst rather than stretching the schedule.
  const auto t0 = SteadyClock::now() + 20ms;
  std::atomic<std::uint64_t> produced{0};
  std::exception_ptr producer_error;
  std::thread producer([&] {
    pthread_setname_np(pthread_self(), "bench-producer");
    TransactionGenerator gen(cfg.seed);
    const double period_ns = 1e9 / cfg.rate;
    try {
      for (std::uint64_t seq = 0; seq < total; ++seq) {
        const auto due = t0 + std::chrono::nanoseconds(
                                  static_cast<std::int64_t>(std::floor(period_ns * static_cast<double>(seq))));
        auto now = SteadyClock::now();
        if (now < due) {
          std::this_thread::sleep_until(due);
          now = SteadyClock::now();
        }
        Event e = gen.next(seq, wall_micros());
        amounts[seq] = std::get<double>(e.attrs.at("amount"));
        send_time[seq] = now;
        if (direct) {
          direct->push(e);
        } else {
          runner.push(e);
        }
        produced.store(seq + 1, std::memory_order_release);
      }
    } catch (...) {
      producer_error = std::current_exception();
    }
  });

  std::optional<UpdateMetrics> update;
  SteadyClock::time_point t_update{};
  std::uint64_t seq_after_update = std::numeric_limits<std::uint64_t>::max();
  std::exception_ptr update_error;
  if (cfg.update_at_s) {
    std::this_thread::sleep_until(t0 + seconds(*cfg.update_at_s));
    update.emplace();
    update->strategy = std::string(to_string(cfg.update_strategy));
    t_update = SteadyClock::now();
    update->issued_at_s = std::chrono::duration<double>(t_update - t0).count();
    try {
      if (cfg.update_strategy == UpdateStrategy::kHot) {
        update->report = runner.update("op", kToVersion);
        update->update_time_ms = update->report->update_duration_ms;
      } else {
        update->update_time_ms = static_cast<double>(runner.redeploy({{"op", kToVersion}}).count());
      }
    } catch (...) {
      update_error = std::current_exception();
    }
    seq_after_update = produced.load(std::memory_order_acquire);
  }
  producer.join();
  const auto t_produced = SteadyClock::now();
  if (direct) direct->close();
  const bool drained = runner.drain(60s);
  runner.stop();
  if (producer_error) std::rethrow_exception(producer_error);
  if (update_error) std::rethrow_exception(update_error);
  if (!drained) throw std::runtime_error("pipeline did not drain within 60 s");

  RunMetrics m;
  m.config = cfg;
  const auto last_send = total > 0 ? send_time[total - 1] : t0;
  const double span_s = std::chrono::duration<double>(last_send - t0).count() + 1.0 / cfg.rate;
  m.achieved_rate = static_cast<double>(total) / span_s;

  // Outputs arrive on one thread in order of receipt.
  const auto window_begin = t0 + seconds(cfg.warmup_s);
  const auto window_end = window_begin + seconds(cfg.duration_s);
  std::uint64_t in_window = 0;
  for (const auto t : out_time) in_window += (t >= window_begin && t < window_end);
  m.throughput_total = static_cast<double>(in_window) / cfg.duration_s;
  m.per_second = per_second_counts(out_time, window_begin,
                                   static_cast<std::size_t>(std::floor(cfg.duration_s)));
  std::vector<double> per_second(m.per_second.begin(), m.per_second.end());
  m.throughput = summarize(per_second);
  m.downtime_ms = longest_gap_ms(out_time, window_begin, std::min(window_end, t_produced));

  std::vector<double> latencies;
  latencies.reserve(out_seq.size());
  for (std::size_t i = 0; i < out_seq.size(); ++i) {
    const auto seq = out_seq[i];
    if (seq >= total) continue;
    const auto sent = send_time[seq];
    if (sent < window_begin || sent >= window_end) continue;
    latencies.push_back(std::chrono::duration<double, std::micro>(out_time[i] - sent).count());
  }
  m.latency_us = summarize(latencies);
  if (cfg.keep_samples) m.latency_samples_us = std::move(latencies);

  // Expected outputs. Across a threshold update the input queue splits
  // into a prefix filtered by the old version and a suffix filtered by the
  // new one; the first delivered event only the new version passes marks
  // the split, and nothing produced after the update returned may fall
  // into the prefix.
  std::function<bool(std::uint64_t)> expected;
  if (cfg.query == QueryKind::kForward) {
    expected = [](std::uint64_t) { return true; };
  } else if (!update) {
    expected = [&](std::uint64_t seq) { return amounts[seq] > kFraudThresholdBefore; };
  } else {
    std::uint64_t cutoff = seq_after_update;
    for (const auto seq : out_seq) {
      if (seq < total && amounts[seq] > kFraudThresholdAfter &&
          amounts[seq] <= kFraudThresholdBefore) {
        cutoff = std::min(cutoff, seq);
      }
    }
    expected = [&amounts, cutoff](std::uint64_t seq) {
      const double a = amounts[seq];
      if (a > kFraudThresholdBefore) return true;
      return a > kFraudThresholdAfter && seq >= cutoff;
    };
  }
  m.accounting = account(total, out_seq, expected);

  if (update) {
    const auto begin = std::max(t0, t_update - 1s);
    const auto end = std::min(t_produced, t_update + 5s);
    update->downtime_ms = longest_gap_ms(out_time, begin, end);
    const auto before_begin = window_begin < t_update ? window_begin : t0;
    std::uint64_t before = 0;
    std::uint64_t after = 0;
    const auto after_begin = t_update + 1s;
    for (const auto t : out_time) {
      before += (t >= before_begin && t < t_update);
      after += (t >= after_begin && t < t_produced);
    }
    const double before_s = std::chrono::duration<double>(t_update - before_begin).count();
    const double after_s = std::chrono::duration<double>(t_produced - after_begin).count();
    update->rate_before = before_s > 0 ? static_cast<double>(before) / before_s : 0;
    update->rate_after = after_s > 0 ? static_cast<double>(after) / after_s : 0;
    m.update = std::move(update);
  }

  if (m.achieved_rate < 0.95 * cfg.rate) {
    throw RateError("producer reached " + std::to_string(m.achieved_rate) + " ev/s of " +
                        std::to_string(cfg.rate),
                    m.to_json());
  }
  return m;
}

}  // namespace cepless::bench
