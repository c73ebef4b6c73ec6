#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cepless/event.hpp"

namespace cepless {

/// f_ω: maps one input event to zero or more output events.
using OperatorFunction = std::function<std::vector<Event>(const Event&)>;

inline constexpr double kDefaultFraudThreshold = 0.78;

/// True iff attrs.amount > threshold. Throws std::invalid_argument when the
/// event has no numeric `amount`.
bool fraud_predicate(const Event& event, double threshold);

OperatorFunction forward_operator();
OperatorFunction fraud_filter(double threshold = kDefaultFraudThreshold);

/// Declarative description of one of the reference operators, as stored in
/// an operator package's operator.json.
struct OperatorSpec {
  std::string kind = "forward";  // forward | fraud
  double threshold = kDefaultFraudThreshold;
  std::chrono::microseconds delay_per_event{0};  // artificial processing cost
  bool fail_on_boot = false;                      // exit before announcing ready

  static OperatorSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

OperatorFunction make_operator(const OperatorSpec& spec);

}  // namespace cepless
