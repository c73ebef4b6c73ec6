#include "cepless/queue_store.hpp"

#include <algorithm>
#include <charconv>

#include "cepless/event.hpp"

namespace cepless {

using protocol::Reply;
using protocol::Request;

namespace {

std::optional<std::size_t> parse_count(std::string_view text) {
  std::int64_t value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size() ||
      value < 0) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(value);
}

std::string upper(std::string_view verb) {
  std::string out(verb);
  for (auto& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

Reply arity_error(const std::string& verb) {
  return Reply::of_error("wrong number of arguments for " + verb);
}

}  // namespace

QueueStore::Queue& QueueStore::get_or_create(const std::string& name) {
  auto [it, inserted] = queues_.try_emplace(name);
  if (inserted) it->second.created_at = std::chrono::system_clock::now();
  return it->second;
}

Reply QueueStore::execute(const Request& request) { return execute(Request(request)); }

Reply QueueStore::execute(Request&& request) {
  if (request.empty()) return Reply::of_error("empty command");
  const std::string verb = upper(request[0]);

  if (verb == "PING") {
    if (request.size() != 1) return arity_error(verb);
    return Reply::ok();
  }

  if (request.size() < 2) return arity_error(verb);
  const std::string& name = request[1];
  if (!is_valid_queue_key(name)) return Reply::of_error("bad queue name");

  if (verb == "PUSH") {
    if (request.size() != 3) return arity_error(verb);
    if (request[2].size() > kMaxPayloadBytes) return Reply::of_error("size");
    std::lock_guard lock(mutex_);
    auto& queue = get_or_create(name);
    if (queue.items.size() >= max_items_) return Reply::of_error("full");
    queue.items.push_back(std::move(request[2]));
    return Reply::ok();
  }
  if (verb == "RANGE") {
    if (request.size() != 4) return arity_error(verb);
    const auto start = parse_count(request[2]);
    const auto count = parse_count(request[3]);
    if (!start || !count) return Reply::of_error("bad index");
    return Reply::of_array(range(name, *start, *count));
  }
  if (verb == "TRIM") {
    if (request.size() != 3) return arity_error(verb);
    const auto count = parse_count(request[2]);
    if (!count) return Reply::of_error("bad count");
    std::lock_guard lock(mutex_);
    const auto it = queues_.find(name);
    if (it != queues_.end()) {
      auto& items = it->second.items;
      const auto n = std::min(*count, items.size());
      items.erase(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n));
    }
    return Reply::ok();
  }
  if (verb == "LEN") {
    if (request.size() != 2) return arity_error(verb);
    return Reply::of_integer(static_cast<std::int64_t>(length(name)));
  }
  if (verb == "QCREATE") {
    if (request.size() != 2) return arity_error(verb);
    std::lock_guard lock(mutex_);
    get_or_create(name);
    return Reply::ok();
  }
  if (verb == "QDELETE") {
    if (request.size() != 2) return arity_error(verb);
    std::lock_guard lock(mutex_);
    if (queues_.erase(name) == 0) return Reply::of_error("unknown queue");
    return Reply::ok();
  }
  return Reply::of_error("unknown command '" + request[0] + "'");
}

void QueueStore::execute_into(Request&& request, std::string& out) {
  if (request.size() == 4 && upper(request[0]) == "RANGE" && is_valid_queue_key(request[1])) {
    const auto start = parse_count(request[2]);
    const auto count = parse_count(request[3]);
    if (start && count) {
      std::lock_guard lock(mutex_);
      const auto it = queues_.find(request[1]);
      std::size_t n = 0;
      if (it != queues_.end() && *start < it->second.items.size()) {
        n = std::min(*count, it->second.items.size() - *start);
      }
      protocol::append_array_header(out, n);
      if (n == 0) return;
      const auto first = it->second.items.begin() + static_cast<std::ptrdiff_t>(*start);
      std::size_t bytes = 0;
      for (auto i = first; i != first + static_cast<std::ptrdiff_t>(n); ++i) bytes += i->size() + 16;
      out.reserve(out.size() + bytes);
      for (auto i = first; i != first + static_cast<std::ptrdiff_t>(n); ++i) {
        protocol::append_bulk(out, *i);
      }
      return;
    }
  }
  protocol::append_reply(out, execute(std::move(request)));
}

std::size_t QueueStore::length(std::string_view queue) const {
  std::lock_guard lock(mutex_);
  const auto it = queues_.find(std::string(queue));
  return it == queues_.end() ? 0 : it->second.items.size();
}

std::vector<std::string> QueueStore::range(std::string_view queue, std::size_t start,
                                           std::size_t count) const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  const auto it = queues_.find(std::string(queue));
  if (it == queues_.end()) return out;
  const auto& items = it->second.items;
  if (start >= items.size()) return out;
  const auto n = std::min(count, items.size() - start);
  out.reserve(n);
  const auto first = items.begin() + static_cast<std::ptrdiff_t>(start);
  out.assign(first, first + static_cast<std::ptrdiff_t>(n));
  return out;
}

std::vector<std::string> QueueStore::queue_names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> names;
  names.reserve(queues_.size());
  for (const auto& [name, queue] : queues_) names.push_back(name);
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace cepless
