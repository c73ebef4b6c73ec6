#include <gtest/gtest.h>

#include <random>

#include "cepless/backoff.hpp"
#include "cepless/batching_client.hpp"
#include "cepless/clock.hpp"
#include "cepless/queue_server.hpp"
#include "cepless/queue_store.hpp"
#include "test_util.hpp"

using namespace cepless;
using namespace std::chrono_literals;

namespace {

// Counts exchanges (one exchange is one write burst on the wire).
class CountingTransport final : public Transport {
 public:
  CountingTransport(QueueStore& store, std::vector<std::size_t>& log) : inner_(store), log_(log) {}
  std::vector<protocol::Reply> exchange(std::span<const protocol::Request> requests) override {
    log_.push_back(requests.size());
    return inner_.exchange(requests);
  }

 private:
  LocalTransport inner_;
  std::vector<std::size_t>& log_;
};

TransportFactory counting_factory(QueueStore& store, std::vector<std::size_t>& log) {
  return [&store, &log] { return std::make_unique<CountingTransport>(store, log); };
}

Event ev(std::uint64_t seq) { return Event{seq, static_cast<std::int64_t>(seq) * 10, {}}; }

BatchingConfig config(std::size_t out, std::size_t in, std::chrono::nanoseconds inc = 1ms,
                      std::chrono::nanoseconds cap = 1s) {
  BatchingConfig c;
  c.out_batch_size = out;
  c.in_batch_size = in;
  c.backoff_increment = inc;
  c.backoff_cap = cap;
  return c;
}

}  // namespace

TEST(LinearBackoff, ProgressionCapAndReset) {
  LinearBackoff b(3ns, 10ns);
  EXPECT_EQ(b.next(), 3ns);
  EXPECT_EQ(b.next(), 6ns);
  EXPECT_EQ(b.next(), 9ns);
  EXPECT_EQ(b.next(), 10ns);
  EXPECT_EQ(b.next(), 10ns);
  b.reset();
  EXPECT_EQ(b.current(), 0ns);
  EXPECT_EQ(b.next(), 3ns);
  EXPECT_THROW(LinearBackoff(0ns, 1ns), std::invalid_argument);
  EXPECT_THROW(LinearBackoff(2ns, 1ns), std::invalid_argument);
}

TEST(BatchingConfig, Validation) {
  EXPECT_NO_THROW(BatchingConfig{}.validate());
  EXPECT_THROW(config(0, 1).validate(), std::invalid_argument);
  EXPECT_THROW(config(1, 0).validate(), std::invalid_argument);
  EXPECT_THROW(config(1, 1, 0ns).validate(), std::invalid_argument);
  EXPECT_THROW(config(1, 1, 2ms, 1ms).validate(), std::invalid_argument);
}

TEST(BatchingClient, ReceiveEventIsBufferedOnly) {
  QueueStore store;
  std::vector<std::size_t> log;
  BatchingClient client(config(2, 1), counting_factory(store, log), {"b-in", ""}, {},
                        std::make_shared<FakeClock>());
  client.receive_event(ev(1));
  EXPECT_EQ(client.pending(), 1u);
  EXPECT_TRUE(log.empty());
  for (std::uint64_t i = 2; i <= 5; ++i) client.receive_event(ev(i));
  EXPECT_TRUE(client.poll_send());
  EXPECT_EQ(client.pending(), 3u);
  EXPECT_EQ(store.length("b-in"), 2u);
  client.stop();
}

TEST(BatchingClient, FlushSizesFollowPopFront) {
  QueueStore store;
  std::vector<std::size_t> log;
  BatchingClient client(config(10, 1), counting_factory(store, log), {"f-in", ""}, {},
                        std::make_shared<FakeClock>());
  for (std::uint64_t i = 0; i < 25; ++i) client.receive_event(ev(i));
  while (client.poll_send()) {
  }
  EXPECT_EQ(log, (std::vector<std::size_t>{10, 10, 5}));
  client.stop();
}

TEST(BatchingClient, FlushCountIsCeilNOverB) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = rng() % 500;
    const std::size_t b = 1 + rng() % 64;
    QueueStore store;
    std::vector<std::size_t> log;
    BatchingClient client(config(b, 1), counting_factory(store, log), {"f-in", ""}, {},
                          std::make_shared<FakeClock>());
    for (std::uint64_t i = 0; i < n; ++i) client.receive_event(ev(i));
    while (client.poll_send()) {
    }
    ASSERT_EQ(log.size(), (n + b - 1) / b) << n << "/" << b;
    ASSERT_EQ(store.length("f-in"), n);
    client.stop();
  }
}

TEST(BatchingClient, SendBackoffUnderFakeClock) {
  QueueStore store;
  auto clock = std::make_shared<FakeClock>();
  BatchingClient client(config(4, 1, 5us, 18us), local_transport_factory(store), {"k-in", ""},
                        {}, clock);
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(client.poll_send());
  client.receive_event(ev(0));
  EXPECT_TRUE(client.poll_send());
  EXPECT_FALSE(client.poll_send());
  EXPECT_FALSE(client.poll_send());
  EXPECT_EQ(clock->sleeps(), (std::vector<Clock::duration>{5us, 10us, 15us, 18us, 18us, 5us, 10us}));
  client.stop();
}

TEST(BatchingClient, EmptyBufferPolledThreeTimes) {
  QueueStore store;
  auto clock = std::make_shared<FakeClock>();
  BatchingClient client(config(1, 1, 1ns, 1s), local_transport_factory(store), {"k-in", ""}, {},
                        clock);
  for (int i = 0; i < 3; ++i) client.poll_send();
  EXPECT_EQ(clock->sleeps(), (std::vector<Clock::duration>{1ns, 2ns, 3ns}));
  client.stop();
}

TEST(BatchingClient, ReceiveBackoffAndBatches) {
  QueueStore store;
  for (const char* p : {"a", "b", "c"}) {
    store.execute({"PUSH", "r-out", encode_event(Event{static_cast<std::uint64_t>(p[0]), 0, {}})});
  }
  auto clock = std::make_shared<FakeClock>();
  std::vector<std::vector<std::uint64_t>> batches;
  BatchingClient client(
      config(1, 2, 2us, 5us), local_transport_factory(store), {"", "r-out"},
      [&](const std::vector<Event>& events) {
        batches.emplace_back();
        for (const auto& e : events) batches.back().push_back(e.seq);
      },
      clock);
  EXPECT_TRUE(client.poll_receive());
  EXPECT_TRUE(client.poll_receive());
  EXPECT_FALSE(client.poll_receive());
  EXPECT_FALSE(client.poll_receive());
  EXPECT_FALSE(client.poll_receive());
  EXPECT_EQ(batches, (std::vector<std::vector<std::uint64_t>>{{'a', 'b'}, {'c'}}));
  EXPECT_EQ(clock->sleeps(), (std::vector<Clock::duration>{2us, 4us, 5us}));
  EXPECT_EQ(store.length("r-out"), 0u);
  client.stop();
}

TEST(BatchingClient, CallbackFailureRedelivers) {
  QueueStore store;
  for (std::uint64_t i = 0; i < 5; ++i) store.execute({"PUSH", "r-out", encode_event(ev(i))});
  int calls = 0;
  std::vector<std::uint64_t> accepted;
  BatchingClient client(
      config(1, 3), local_transport_factory(store), {"", "r-out"},
      [&](const std::vector<Event>& events) {
        if (++calls == 2) throw std::runtime_error("listener down");
        for (const auto& e : events) accepted.push_back(e.seq);
      },
      std::make_shared<FakeClock>());
  for (int i = 0; i < 6; ++i) client.poll_receive();
  client.stop();
  EXPECT_EQ(accepted, (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(client.stats().callback_failures, 1u);
  EXPECT_EQ(store.length("r-out"), 0u);
}

TEST(BatchingClient, LargeRangeBatches) {
  QueueStore store;
  for (std::uint64_t i = 0; i < 100000; ++i) store.execute({"PUSH", "big-out", encode_event(ev(i))});
  std::uint64_t next = 0;
  BatchingClient client(
      config(1, 10000), local_transport_factory(store), {"", "big-out"},
      [&](const std::vector<Event>& events) {
        for (const auto& e : events) ASSERT_EQ(e.seq, next++);
      },
      std::make_shared<FakeClock>());
  while (client.poll_receive()) {
  }
  client.stop();
  EXPECT_EQ(next, 100000u);
  const auto trips = client.stats().range_round_trips;
  EXPECT_GE(trips, 10u);
  EXPECT_LE(trips, 100000u);
}

// Any batching configuration yields the same delivered sequence as the
// (1, 1, minimal backoff) baseline, under random interleavings of the send
// loop, a forwarding consumer and the receive loop, with injected callback
// failures.
TEST(BatchingClient, BatchingEquivalence) {
  std::mt19937_64 rng(77);
  auto run = [](const BatchingConfig& cfg, const std::vector<Event>& input, std::uint64_t seed,
                double failure_rate) {
    std::mt19937_64 sched(seed);
    QueueStore store;
    std::vector<Event> out;
    BatchingClient client(
        cfg, local_transport_factory(store), {"e-in", "e-out"},
        [&](const std::vector<Event>& events) {
          if (std::uniform_real_distribution<>(0, 1)(sched) < failure_rate) {
            throw std::runtime_error("injected");
          }
          out.insert(out.end(), events.begin(), events.end());
        },
        std::make_shared<FakeClock>());
    std::size_t fed = 0;
    LocalTransport forwarder(store);
    while (out.size() < input.size()) {
      switch (sched() % 4) {
        case 0:
          for (std::size_t k = sched() % 8; k > 0 && fed < input.size(); --k) {
            client.receive_event(input[fed++]);
          }
          break;
        case 1:
          client.poll_send();
          break;
        case 2: {
          const std::size_t k = 1 + sched() % 10;
          const protocol::Request range[] = {{"RANGE", "e-in", "0", std::to_string(k)}};
          const auto items = forwarder.exchange(range).front().items;
          std::vector<protocol::Request> cmds;
          for (const auto& item : items) cmds.push_back({"PUSH", "e-out", item});
          cmds.push_back({"TRIM", "e-in", std::to_string(items.size())});
          forwarder.exchange(cmds);
          break;
        }
        default:
          client.poll_receive();
      }
    }
    client.stop();
    return out;
  };
  for (int c = 0; c < 200; ++c) {
    std::vector<Event> input;
    const std::size_t n = rng() % 300;
    for (std::uint64_t i = 0; i < n; ++i) input.push_back(testing_util::random_event(rng, i));
    const auto baseline = run(config(1, 1, 1ns, 1ns), input, rng(), 0.0);
    ASSERT_EQ(baseline, input);
    const auto cfg = config(1 + rng() % 50, 1 + rng() % 50,
                            std::chrono::nanoseconds(1 + rng() % 100000), 1s);
    ASSERT_EQ(run(cfg, input, rng(), 0.1), baseline) << "case " << c;
  }
}

TEST(BatchingClient, StopSemantics) {
  QueueStore store;
  {
    BatchingClient idle(config(5, 5), local_transport_factory(store), {"s-in", ""});
    idle.start();
    const auto t0 = std::chrono::steady_clock::now();
    idle.stop();
    EXPECT_LT(std::chrono::steady_clock::now() - t0, 500ms);
    EXPECT_THROW(idle.stop(), std::logic_error);
    EXPECT_THROW(idle.receive_event(ev(0)), ClientStopped);
  }
  BatchingClient client(config(100, 5, 50ms, 1s), local_transport_factory(store), {"s-in", ""});
  client.start();
  std::this_thread::sleep_for(20ms);
  for (std::uint64_t i = 0; i < 3; ++i) client.receive_event(ev(i));
  client.stop();
  EXPECT_EQ(store.length("s-in"), 3u);
}

TEST(BatchingClient, ShutdownTimeoutReportsUnflushed) {
  QueueStore store(2);
  BatchingClient client(config(10, 1, 1ms, 2ms), local_transport_factory(store), {"full-in", ""});
  client.start();
  for (std::uint64_t i = 0; i < 5; ++i) client.receive_event(ev(i));
  try {
    client.stop(100ms);
    FAIL() << "expected ShutdownTimeout";
  } catch (const ShutdownTimeout& e) {
    EXPECT_EQ(e.unflushed(), 3u);
  }
  EXPECT_EQ(store.length("full-in"), 2u);
}

TEST(BatchingClient, Backpressure) {
  QueueStore store;
  BatchingConfig cfg = config(1, 1);
  cfg.send_buffer_limit = 3;
  BatchingClient client(cfg, local_transport_factory(store), {"bp-in", ""});
  for (std::uint64_t i = 0; i < 3; ++i) client.receive_event(ev(i));
  EXPECT_THROW(client.receive_event(ev(3)), BackpressureError);
  EXPECT_EQ(client.high_water(), 3u);
  client.stop();
}

TEST(BatchingClient, NoBusySpinWhenIdle) {
  QueueStore store;
  std::vector<std::size_t> log;
  std::mutex log_mutex;
  auto factory = [&] {
    struct Locked final : Transport {
      Locked(QueueStore& s, std::vector<std::size_t>& l, std::mutex& m) : inner(s), log(l), mu(m) {}
      std::vector<protocol::Reply> exchange(std::span<const protocol::Request> r) override {
        {
          std::lock_guard lock(mu);
          log.push_back(r.size());
        }
        return inner.exchange(r);
      }
      LocalTransport inner;
      std::vector<std::size_t>& log;
      std::mutex& mu;
    };
    return std::unique_ptr<Transport>(std::make_unique<Locked>(store, log, log_mutex));
  };
  BatchingClient client(
      config(10, 10, 1ms, 10ms), factory, {"idle-in", "idle-out"},
      [](const std::vector<Event>&) {});
  client.start();
  const auto d = 600ms;
  std::this_thread::sleep_for(d);
  client.stop();
  std::lock_guard lock(log_mutex);
  // Ramp of 10 steps (55 ms) then one round trip per 10 ms cap.
  EXPECT_LE(log.size(), 10u + static_cast<std::size_t>(d / 10ms) + 5u);
  EXPECT_GE(log.size(), 10u);
}

TEST(BatchingClient, EndToEndOverTcp) {
  QueueServer server;
  server.start(net::Address{"127.0.0.1", 0});
  {
    BatchingClient client(config(1000, 1000, 100us, 10ms),
                          tcp_transport_factory(net::Address{"127.0.0.1", server.port()}),
                          {"tcp-in", ""});
    client.start();
    for (std::uint64_t i = 0; i < 10000; ++i) client.receive_event(ev(i));
    client.stop();
  }
  EXPECT_EQ(server.store().length("tcp-in"), 10000u);
  const auto items = server.store().range("tcp-in", 0, 10000);
  for (std::uint64_t i = 0; i < 10000; ++i) ASSERT_EQ(decode_event(items[i]).seq, i);
  server.stop();
}

TEST(FakeClock, RecordsAndAdvances) {
  FakeClock clock;
  const auto t0 = clock.now();
  std::size_t last = 0;
  clock.set_on_sleep([&](std::size_t i) { last = i; });
  clock.sleep_for(5ms);
  clock.advance(1ms);
  EXPECT_EQ(clock.now() - t0, 6ms);
  EXPECT_EQ(last, 1u);
  EXPECT_EQ(clock.sleeps().size(), 1u);
}
