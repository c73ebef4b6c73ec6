#include "cepless/operators.hpp"

#include <stdexcept>
#include <thread>

namespace cepless {

bool fraud_predicate(const Event& event, double threshold) {
  const auto it = event.attrs.find("amount");
  if (it == event.attrs.end()) throw std::invalid_argument("event has no 'amount'");
  if (const auto* d = std::get_if<double>(&it->second)) return *d > threshold;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) {
    return static_cast<double>(*i) > threshold;
  }
  throw std::invalid_argument("'amount' is not numeric");
}

OperatorFunction forward_operator() {
  return [](const Event& e) { return std::vector<Event>{e}; };
}

OperatorFunction fraud_filter(double threshold) {
  return [threshold](const Event& e) {
    if (fraud_predicate(e, threshold)) return std::vector<Event>{e};
    return std::vector<Event>{};
  };
}

OperatorSpec OperatorSpec::from_json(const nlohmann::json& doc) {
  OperatorSpec spec;
  spec.kind = doc.value("kind", spec.kind);
  spec.threshold = doc.value("threshold", spec.threshold);
  spec.delay_per_event = std::chrono::microseconds(doc.value("delay_us", std::int64_t{0}));
  spec.fail_on_boot = doc.value("fail_on_boot", false);
  if (spec.kind != "forward" && spec.kind != "fraud") {
    throw std::invalid_argument("unknown operator kind '" + spec.kind + "'");
  }
  return spec;
}

nlohmann::json OperatorSpec::to_json() const {
  nlohmann::json doc;
  doc["kind"] = kind;
  doc["threshold"] = threshold;
  doc["delay_us"] = static_cast<std::int64_t>(delay_per_event.count());
  doc["fail_on_boot"] = fail_on_boot;
  return doc;
}

OperatorFunction make_operator(const OperatorSpec& spec) {
  OperatorFunction f = spec.kind == "fraud" ? fraud_filter(spec.threshold) : forward_operator();
  if (spec.delay_per_event.count() > 0) {
    return [f = std::move(f), delay = spec.delay_per_event](const Event& e) {
      std::this_thread::sleep_for(delay);
      return f(e);
    };
  }
  return f;
}

}  // namespace cepless
