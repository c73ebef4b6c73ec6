#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cepless/net.hpp"
#include "cepless/operators.hpp"
#include "cepless/transport.hpp"

namespace cepless {

// Environment contract between the node manager and a worker process.
inline constexpr const char* kEnvQueueAddr = "CEPLESS_QUEUE_ADDR";
inline constexpr const char* kEnvInQueue = "CEPLESS_IN_QUEUE";
inline constexpr const char* kEnvOutQueue = "CEPLESS_OUT_QUEUE";
inline constexpr const char* kEnvCtlQueue = "CEPLESS_CTL_QUEUE";
inline constexpr const char* kEnvBatchSize = "CEPLESS_BATCH_SIZE";
inline constexpr const char* kEnvBackoffNs = "CEPLESS_BACKOFF_NS";
// Optional: when "1" the worker announces readiness but does not consume
// until it sees kActivate on its control queue.
inline constexpr const char* kEnvStartPaused = "CEPLESS_START_PAUSED";

// Control payloads on the per-worker control queue. The queue is only ever
// scanned with RANGE, never trimmed, so both sides see every message.
inline constexpr std::string_view kReady = "__ready__";
inline constexpr std::string_view kDrain = "__drain__";
inline constexpr std::string_view kDrained = "__drained__";
inline constexpr std::string_view kActivate = "__activate__";

class ContextError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OperatorContext {
  net::Address queue_address;
  std::string in_queue;
  std::string out_queue;
  std::string ctl_queue;
  std::string dlq_queue;
  std::size_t batch_size = 1000;
  std::chrono::nanoseconds backoff_increment{100'000};
  std::chrono::nanoseconds backoff_cap{10'000'000};
  bool start_paused = false;

  /// Throws ContextError naming the first missing or invalid variable.
  static OperatorContext from_env(const std::map<std::string, std::string>& env);
  static OperatorContext from_process_env();

  std::map<std::string, std::string> to_env() const;
};

struct WorkerResult {
  std::uint64_t events_in = 0;
  std::uint64_t events_out = 0;
  std::uint64_t dead_lettered = 0;
  bool drained = false;  // exited because of a drain request
};

/// The operator worker loop: announce readiness, optionally wait for
/// activation, then repeatedly range a batch from the input queue, apply
/// `f` in order, push the results (or dead-letter the input when `f`
/// throws), and trim the consumed batch. Returns after acknowledging a drain
/// request or when `stop` becomes true.
WorkerResult run_worker(const OperatorContext& ctx, const OperatorFunction& f,
                        const TransportFactory& transport_factory,
                        const std::atomic<bool>* stop = nullptr);

}  // namespace cepless
