#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cepless {

/// Scalar attribute value. Anything richer is not representable.
using AttrValue = std::variant<std::string, std::int64_t, double>;
using Attributes = std::map<std::string, AttrValue>;

/// The universal message exchanged between the CEP host and operators.
struct Event {
  std::uint64_t seq = 0;          // producer-assigned, strictly increasing
  std::int64_t ts_produced = 0;   // epoch microseconds, producer wall clock
  Attributes attrs;

  friend bool operator==(const Event&, const Event&) = default;
};

enum class BatchDirection { kToOperator, kFromOperator };

struct EventBatch {
  std::vector<Event> events;
  BatchDirection direction = BatchDirection::kToOperator;
};

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecodingError : public std::runtime_error {
 public:
  DecodingError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}

  /// The offending key ("" when the text is not an object at all).
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Canonical bytes: {"attrs":{...},"seq":N,"ts":N} with sorted keys.
std::string encode_event(const Event& event);
void encode_event_into(std::string& out, const Event& event);

/// Accepts any key order and JSON whitespace; rejects unknown keys.
Event decode_event(std::string_view bytes);

/// Queue identifier: `[a-z0-9-]{1,64}`.
bool is_valid_queue_key(std::string_view name);

/// A queue name that belongs to an operator's queue pair (`-in` / `-out`).
class QueueName {
 public:
  /// Throws std::invalid_argument if `value` is not a valid pair name.
  explicit QueueName(std::string value);

  const std::string& str() const noexcept { return value_; }
  std::string_view stem() const;
  bool is_input() const;

  friend bool operator==(const QueueName&, const QueueName&) = default;

 private:
  std::string value_;
};

struct QueuePair {
  QueueName input;
  QueueName output;

  /// `<instance_id>-in` / `<instance_id>-out`.
  static QueuePair for_instance(std::string_view instance_id);

  friend bool operator==(const QueuePair&, const QueuePair&) = default;
};

/// Auxiliary queues owned by an operator instance.
std::string control_queue_name(std::string_view instance_id, std::uint32_t generation);
std::string dead_letter_queue_name(std::string_view instance_id);

}  // namespace cepless
