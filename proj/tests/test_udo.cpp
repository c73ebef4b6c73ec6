#include <gtest/gtest.h>

#include <atomic>
#include <future>
#include <numeric>
#include <set>

#include "cepless/udo.hpp"
#include "op_fixture.hpp"

using namespace cepless;
using namespace std::chrono_literals;
using testing_util::Stack;

namespace {

NodeManagerConfig fast_config() {
  NodeManagerConfig c;
  c.batch_size = 100;
  return c;
}

UdoConfig udo_config() {
  UdoConfig c;
  c.batching.in_batch_size = 100;
  c.batching.out_batch_size = 100;
  return c;
}

Event numbered(std::uint64_t seq) {
  return Event{seq, static_cast<std::int64_t>(seq), {{"amount", 1.0}}};
}

// Creates the queue pair and nothing else: no worker consumes the input.
class QueuesOnlyDeployer final : public Deployer {
 public:
  explicit QueuesOnlyDeployer(net::Address address) : address_(std::move(address)) {}

  OperatorHandle deploy(const std::string& name, const std::optional<std::string>&) override {
    OperatorHandle h(name + "-" + std::to_string(next_++));
    QueueConnection conn(address_);
    conn.create(h.queues.input.str());
    conn.create(h.queues.output.str());
    h.queue_address = address_.to_string();
    h.state = OperatorState::kRunning;
    return h;
  }
  UpdateReport update(const std::string&, const std::string&) override { return {}; }
  void remove(const std::string& id) override { removed.push_back(id); }
  OperatorHandle status(const std::string& id) override { return OperatorHandle(id); }
  std::vector<OperatorHandle> list() override { return {}; }

  std::vector<std::string> removed;

 private:
  net::Address address_;
  int next_ = 0;
};

// Delays every deployment; used to provoke the request timeout.
class SlowDeployer final : public Deployer {
 public:
  SlowDeployer(Deployer& inner, std::chrono::milliseconds delay) : inner_(inner), delay_(delay) {}

  OperatorHandle deploy(const std::string& name,
                        const std::optional<std::string>& version) override {
    std::this_thread::sleep_for(delay_);
    return inner_.deploy(name, version);
  }
  UpdateReport update(const std::string& id, const std::string& v) override {
    return inner_.update(id, v);
  }
  void remove(const std::string& id) override { inner_.remove(id); }
  OperatorHandle status(const std::string& id) override { return inner_.status(id); }
  std::vector<OperatorHandle> list() override { return inner_.list(); }

 private:
  Deployer& inner_;
  std::chrono::milliseconds delay_;
};

class UdoTest : public ::testing::Test {
 protected:
  UdoTest() : stack_(fast_config()) {
    stack_.publish("forward-op", "1.0.0", testing_util::forward_spec());
    stack_.publish("forward-op", "2.0.0", testing_util::forward_spec());
  }
  Stack stack_;
};

}  // namespace

TEST_F(UdoTest, RequestReportsAddressOnDispatchThread) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  std::promise<std::pair<OperatorAddress, std::thread::id>> ready;
  const auto caller = std::this_thread::get_id();
  udo.request_operator("forward-op", [&](const OperatorAddress& a) {
    ready.set_value({a, std::this_thread::get_id()});
  });
  const auto [address, thread] = ready.get_future().get();
  EXPECT_NE(thread, caller);
  EXPECT_EQ(address.queues.input.str(), address.instance_id + "-in");
  EXPECT_EQ(address.queues.output.str(), address.instance_id + "-out");
  EXPECT_EQ(address.queue_server.port, stack_.server.port());
  EXPECT_EQ(stack_.manager->status(address.instance_id).state, OperatorState::kRunning);
}

TEST_F(UdoTest, UnknownOperatorIsDeploymentError) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  try {
    udo.await_operator("no-such-op");
    FAIL() << "expected DeploymentError";
  } catch (const DeploymentError& e) {
    EXPECT_NE(std::string(e.what()).find("not in registry"), std::string::npos);
  }
}

TEST_F(UdoTest, TimeoutRemovesLateInstance) {
  SlowDeployer slow(*stack_.manager, 400ms);
  auto config = udo_config();
  config.deploy_timeout = 100ms;
  {
    UdoInterface udo(testing_util::borrow(slow), config);
    try {
      udo.await_operator("forward-op");
      FAIL() << "expected DeploymentError";
    } catch (const DeploymentError& e) {
      EXPECT_NE(std::string(e.what()).find("timeout"), std::string::npos);
    }
  }
  const auto all = stack_.manager->list();
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].state, OperatorState::kStopped);
}

TEST_F(UdoTest, HundredRequestsHundredInstances) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  std::set<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.insert(udo.await_operator("forward-op").instance_id);
  EXPECT_EQ(ids.size(), 100u);
}

TEST(Udo, SendWithoutConsumerQueuesEvent) {
  QueueServer server;
  server.start(net::Address{"127.0.0.1", 0});
  QueuesOnlyDeployer deployer(net::Address{"127.0.0.1", server.port()});
  UdoInterface udo(testing_util::borrow(deployer), udo_config());
  const auto address = udo.await_operator("op");
  udo.send_event(address, numbered(1));
  EXPECT_TRUE(testing_util::wait_until(
      [&] { return server.store().length(address.queues.input.str()) == 1; }));
  EXPECT_EQ(decode_event(server.store().range(address.queues.input.str(), 0, 1)[0]), numbered(1));
  EXPECT_FALSE(udo.quiescent(address));
}

TEST_F(UdoTest, ListenerSeesInputOrder) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  const auto address = udo.await_operator("forward-op");
  std::vector<std::uint64_t> got;
  std::set<std::thread::id> threads;
  std::mutex m;
  udo.add_listener(address, [&](const Event& e) {
    std::lock_guard lock(m);
    got.push_back(e.seq);
    threads.insert(std::this_thread::get_id());
  });
  for (std::uint64_t i = 0; i < 1000; ++i) udo.send_event(address, numbered(i));
  ASSERT_TRUE(testing_util::wait_until([&] {
    std::lock_guard lock(m);
    return got.size() >= 1000;
  }));
  std::lock_guard lock(m);
  std::vector<std::uint64_t> expected(1000);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(got, expected);
  EXPECT_EQ(threads.size(), 1u);
}

TEST_F(UdoTest, TwoListenersBothReceive) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  const auto address = udo.await_operator("forward-op");
  std::atomic<int> a{0}, b{0};
  udo.add_listener(address, [&](const Event&) { ++a; });
  udo.add_listener(address, [&](const Event&) { ++b; });
  for (std::uint64_t i = 0; i < 300; ++i) udo.send_event(address, numbered(i));
  EXPECT_TRUE(testing_util::wait_until([&] { return a == 300 && b == 300; }));
}

TEST_F(UdoTest, IdleListenerNeverFires) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  const auto address = udo.await_operator("forward-op");
  std::atomic<int> calls{0};
  udo.add_listener(address, [&](const Event&) { ++calls; });
  std::this_thread::sleep_for(200ms);
  EXPECT_EQ(calls.load(), 0);
  EXPECT_TRUE(udo.quiescent(address));
}

TEST_F(UdoTest, RemovedListenerStopsAndDoubleRemoveThrows) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  const auto address = udo.await_operator("forward-op");
  std::atomic<int> first{0}, second{0};
  const auto l1 = udo.add_listener(address, [&](const Event&) { ++first; });
  udo.add_listener(address, [&](const Event&) { ++second; });
  for (std::uint64_t i = 0; i < 100; ++i) udo.send_event(address, numbered(i));
  ASSERT_TRUE(testing_util::wait_until([&] { return first == 100; }));
  udo.remove_listener(l1);
  for (std::uint64_t i = 100; i < 200; ++i) udo.send_event(address, numbered(i));
  ASSERT_TRUE(testing_util::wait_until([&] { return second == 200; }));
  EXPECT_EQ(first.load(), 100);
  EXPECT_THROW(udo.remove_listener(l1), ListenerError);
}

TEST_F(UdoTest, ListenerRemovingItselfDoesNotDeadlock) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  const auto address = udo.await_operator("forward-op");
  std::atomic<int> calls{0};
  std::promise<Listener> self;
  auto handle = self.get_future().share();
  const auto l = udo.add_listener(address, [&](const Event&) {
    if (++calls == 1) udo.remove_listener(handle.get());
  });
  self.set_value(l);
  for (std::uint64_t i = 0; i < 10; ++i) udo.send_event(address, numbered(i));
  std::this_thread::sleep_for(200ms);
  EXPECT_EQ(calls.load(), 1);
}

TEST_F(UdoTest, ThrowingListenerDoesNotStarveOthers) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  const auto address = udo.await_operator("forward-op");
  std::atomic<int> ok{0};
  udo.add_listener(address, [](const Event&) { throw std::runtime_error("listener bug"); });
  udo.add_listener(address, [&](const Event&) { ++ok; });
  for (std::uint64_t i = 0; i < 50; ++i) udo.send_event(address, numbered(i));
  EXPECT_TRUE(testing_util::wait_until([&] { return ok == 50; }));
  EXPECT_EQ(udo.listener_failures(), 50u);
}

TEST_F(UdoTest, RemoveDeliversBacklogThenGoesStale) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  const auto address = udo.await_operator("forward-op");
  std::atomic<int> calls{0};
  const auto l = udo.add_listener(address, [&](const Event&) { ++calls; });
  for (std::uint64_t i = 0; i < 500; ++i) udo.send_event(address, numbered(i));
  udo.remove_operator(address);
  EXPECT_EQ(calls.load(), 500);
  EXPECT_EQ(stack_.manager->status(address.instance_id).state, OperatorState::kStopped);
  EXPECT_THROW(udo.send_event(address, numbered(9)), StaleAddress);
  EXPECT_THROW(udo.add_listener(address, [](const Event&) {}), StaleAddress);
  EXPECT_THROW(udo.remove_operator(address), StaleAddress);
  EXPECT_THROW(udo.remove_listener(l), ListenerError);
}

TEST_F(UdoTest, UpdateKeepsAddressAndStream) {
  UdoInterface udo(testing_util::borrow(*stack_.manager), udo_config());
  const auto address = udo.await_operator("forward-op", "1.0.0");
  std::vector<std::uint64_t> got;
  std::mutex m;
  udo.add_listener(address, [&](const Event& e) {
    std::lock_guard lock(m);
    got.push_back(e.seq);
  });
  std::thread producer([&] {
    for (std::uint64_t i = 0; i < 2000; ++i) {
      udo.send_event(address, numbered(i));
      std::this_thread::sleep_for(500us);
    }
  });
  std::this_thread::sleep_for(300ms);
  const auto report = udo.update_operator(address, "2.0.0");
  producer.join();
  EXPECT_EQ(report.new_version, "2.0.0");
  ASSERT_TRUE(testing_util::wait_until([&] {
    std::lock_guard lock(m);
    return got.size() >= 2000;
  }));
  std::this_thread::sleep_for(100ms);
  std::lock_guard lock(m);
  std::vector<std::uint64_t> expected(2000);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(got, expected);
}
