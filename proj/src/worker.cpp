#include "cepless/worker.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <vector>

#include "cepless/backoff.hpp"
#include "cepless/clock.hpp"

extern char** environ;

namespace cepless {

using protocol::Reply;
using protocol::Request;

namespace {

const std::string& require(const std::map<std::string, std::string>& env, const char* key) {
  const auto it = env.find(key);
  if (it == env.end() || it->second.empty()) {
    throw ContextError(std::string("missing environment variable ") + key);
  }
  return it->second;
}

std::uint64_t parse_positive(const std::string& text, const char* key) {
  std::uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || value == 0) {
    throw ContextError(std::string("invalid value for ") + key + ": '" + text + "'");
  }
  return value;
}

bool contains(const std::vector<std::string>& items, std::string_view message) {
  return std::find(items.begin(), items.end(), message) != items.end();
}

class WorkerSession {
 public:
  WorkerSession(const OperatorContext& ctx, const TransportFactory& factory,
                const std::atomic<bool>* stop)
      : ctx_(ctx),
        factory_(factory),
        stop_(stop),
        reconnect_backoff_(std::chrono::milliseconds(1), std::chrono::milliseconds(100)) {}

  bool stopped() const { return stop_ != nullptr && stop_->load(); }

  // Retries across reconnects; a flush that failed half-way may be applied
  // twice, which is the at-least-once window of a crashed connection.
  std::vector<Reply> exchange(const std::vector<Request>& commands) {
    return with_retry([&](Transport& t) { return t.exchange(commands); });
  }

  template <typename Call>
  std::vector<Reply> with_retry(const Call& call) {
    while (true) {
      try {
        if (!transport_) transport_ = factory_();
        auto replies = call(*transport_);
        reconnect_backoff_.reset();
        return replies;
      } catch (const TransportError& e) {
        transport_.reset();
        if (stopped()) throw;
        std::cerr << "cepless-worker: " << e.what() << ", reconnecting\n";
        clock_->sleep_for(reconnect_backoff_.next());
      }
    }
  }

  void push_control(std::string_view message) {
    exchange({{"PUSH", ctx_.ctl_queue, std::string(message)}});
  }

  std::vector<std::string> read_control() {
    auto replies = exchange({{"RANGE", ctx_.ctl_queue, "0", "64"}});
    return std::move(replies.front().items);
  }

  // Pushes every command, retrying rejected ones (queue full) in order.
  void push_all(const std::vector<PushCommand>& commands) {
    LinearBackoff backoff(ctx_.backoff_increment, ctx_.backoff_cap);
    std::span<const PushCommand> rest(commands);
    while (!rest.empty()) {
      const auto replies = with_retry([&](Transport& t) { return t.push(rest); });
      std::size_t acked = 0;
      while (acked < replies.size() && !replies[acked].is_error()) ++acked;
      if (acked < replies.size() && replies[acked].error == "size") {
        std::cerr << "cepless-worker: dropping oversized output for " << rest[acked].queue
                  << '\n';
        ++acked;
      }
      rest = rest.subspan(acked);
      if (!rest.empty()) clock_->sleep_for(backoff.next());
    }
  }

  Clock& clock() { return *clock_; }

 private:
  const OperatorContext& ctx_;
  const TransportFactory& factory_;
  const std::atomic<bool>* stop_;
  std::shared_ptr<Clock> clock_ = system_clock();
  std::unique_ptr<Transport> transport_;
  LinearBackoff reconnect_backoff_;
};

}  // namespace

OperatorContext OperatorContext::from_env(const std::map<std::string, std::string>& env) {
  OperatorContext ctx;
  try {
    ctx.queue_address = net::Address::parse(require(env, kEnvQueueAddr));
  } catch (const net::NetError& e) {
    throw ContextError(std::string("invalid value for ") + kEnvQueueAddr + ": " + e.what());
  }
  ctx.in_queue = require(env, kEnvInQueue);
  ctx.out_queue = require(env, kEnvOutQueue);
  ctx.ctl_queue = require(env, kEnvCtlQueue);
  ctx.batch_size = parse_positive(require(env, kEnvBatchSize), kEnvBatchSize);
  ctx.backoff_increment =
      std::chrono::nanoseconds(parse_positive(require(env, kEnvBackoffNs), kEnvBackoffNs));
  ctx.backoff_cap = std::max(ctx.backoff_cap, ctx.backoff_increment);

  for (const auto* key : {kEnvInQueue, kEnvOutQueue, kEnvCtlQueue}) {
    if (!is_valid_queue_key(env.at(key))) {
      throw ContextError(std::string("invalid queue name in ") + key);
    }
  }
  try {
    ctx.dlq_queue = dead_letter_queue_name(QueueName(ctx.in_queue).stem());
  } catch (const std::invalid_argument&) {
    throw ContextError(std::string(kEnvInQueue) + " must end in -in");
  }
  const auto paused = env.find(kEnvStartPaused);
  ctx.start_paused = paused != env.end() && paused->second == "1";
  return ctx;
}

OperatorContext OperatorContext::from_process_env() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  return from_env(env);
}

std::map<std::string, std::string> OperatorContext::to_env() const {
  std::map<std::string, std::string> env{
      {kEnvQueueAddr, queue_address.to_string()},
      {kEnvInQueue, in_queue},
      {kEnvOutQueue, out_queue},
      {kEnvCtlQueue, ctl_queue},
      {kEnvBatchSize, std::to_string(batch_size)},
      {kEnvBackoffNs, std::to_string(backoff_increment.count())},
  };
  if (start_paused) env[kEnvStartPaused] = "1";
  return env;
}

WorkerResult run_worker(const OperatorContext& ctx, const OperatorFunction& f,
                        const TransportFactory& transport_factory,
                        const std::atomic<bool>* stop) {
  WorkerResult result;
  WorkerSession session(ctx, transport_factory, stop);
  session.push_control(kReady);

  if (ctx.start_paused) {
    LinearBackoff backoff(ctx.backoff_increment,
                          std::min<std::chrono::nanoseconds>(ctx.backoff_cap,
                                                             std::chrono::milliseconds(1)));
    while (true) {
      if (session.stopped()) return result;
      const auto control = session.read_control();
      if (contains(control, kDrain)) {
        session.push_control(kDrained);
        result.drained = true;
        return result;
      }
      if (contains(control, kActivate)) break;
      session.clock().sleep_for(backoff.next());
    }
  }

  LinearBackoff backoff(ctx.backoff_increment, ctx.backoff_cap);
  const std::string batch = std::to_string(ctx.batch_size);
  std::size_t pending_trim = 0;

  while (true) {
    // The previous batch is trimmed in the same flush as the next read, so
    // a batch leaves the input queue only after its outputs were accepted.
    std::vector<Request> commands;
    if (pending_trim > 0) {
      commands.push_back({"TRIM", ctx.in_queue, std::to_string(pending_trim)});
    }
    if (session.stopped()) {
      if (!commands.empty()) session.exchange(commands);
      return result;
    }
    commands.push_back({"RANGE", ctx.ctl_queue, "0", "64"});
    commands.push_back({"RANGE", ctx.in_queue, "0", batch});
    auto replies = session.exchange(commands);
    pending_trim = 0;

    if (contains(replies[replies.size() - 2].items, kDrain)) {
      session.push_control(kDrained);
      result.drained = true;
      return result;
    }

    const auto& items = replies.back().items;
    if (items.empty()) {
      session.clock().sleep_for(backoff.next());
      continue;
    }
    backoff.reset();

    // Encoded outputs are kept in one buffer; commands hold views into it
    // (or into items for dead letters) once it stops growing.
    std::string encoded;
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // offset, length; npos = dlq
    std::vector<const std::string*> parked;
    spans.reserve(items.size());
    for (const auto& payload : items) {
      try {
        const Event in = decode_event(payload);
        for (const auto& out : f(in)) {
          const std::size_t start = encoded.size();
          encode_event_into(encoded, out);
          spans.emplace_back(start, encoded.size() - start);
          ++result.events_out;
        }
      } catch (const std::exception&) {
        // Poison input: park it and keep the stream moving.
        spans.emplace_back(std::string::npos, parked.size());
        parked.push_back(&payload);
        ++result.dead_lettered;
      }
    }
    std::vector<PushCommand> pushes;
    pushes.reserve(spans.size());
    for (const auto& [start, len] : spans) {
      if (start == std::string::npos) {
        pushes.push_back({ctx.dlq_queue, *parked[len]});
      } else {
        pushes.push_back({ctx.out_queue, std::string_view(encoded).substr(start, len)});
      }
    }
    result.events_in += items.size();
    session.push_all(pushes);
    pending_trim = items.size();
  }
}

}  // namespace cepless
