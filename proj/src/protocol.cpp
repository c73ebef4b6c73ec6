#include "cepless/protocol.hpp"

#include <charconv>

namespace cepless::protocol {

namespace {

constexpr std::size_t kMaxHeaderLine = 64;

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  if (text.empty()) return std::nullopt;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

void append_length(std::string& out, char marker, std::size_t n) {
  char buf[24];
  buf[0] = marker;
  const auto res = std::to_chars(buf + 1, buf + sizeof buf - 2, n);
  res.ptr[0] = '\r';
  res.ptr[1] = '\n';
  out.append(buf, static_cast<std::size_t>(res.ptr + 2 - buf));
}

// Finds a CRLF-terminated line starting at `cursor`; advances past it.
std::optional<std::string_view> line_at(const std::string& buf, std::size_t& cursor) {
  const auto end = buf.find("\r\n", cursor);
  if (end == std::string::npos) return std::nullopt;
  std::string_view line(buf.data() + cursor, end - cursor);
  cursor = end + 2;
  return line;
}

}  // namespace

void append_bulk(std::string& out, std::string_view bytes) {
  append_length(out, '$', bytes.size());
  out.append(bytes);
  out += "\r\n";
}

void append_array_header(std::string& out, std::size_t n) { append_length(out, '*', n); }

void append_request(std::string& out, const Request& request) {
  append_length(out, '*', request.size());
  for (const auto& part : request) append_bulk(out, part);
}

void append_push(std::string& out, std::string_view queue, std::string_view payload) {
  out += "*3\r\n$4\r\nPUSH\r\n";
  append_bulk(out, queue);
  append_bulk(out, payload);
}

void append_reply(std::string& out, const Reply& reply) {
  switch (reply.kind) {
    case Reply::Kind::kOk:
      out += "+OK\r\n";
      break;
    case Reply::Kind::kInteger:
      out.push_back(':');
      out += std::to_string(reply.integer);
      out += "\r\n";
      break;
    case Reply::Kind::kError: {
      out += "-ERR ";
      // Error text is a single line on the wire.
      for (const char c : reply.error) out.push_back(c == '\r' || c == '\n' ? ' ' : c);
      out += "\r\n";
      break;
    }
    case Reply::Kind::kArray:
      append_array_header(out, reply.items.size());
      for (const auto& item : reply.items) append_bulk(out, item);
      break;
  }
}

std::string to_string(const Reply& reply) {
  std::string out;
  append_reply(out, reply);
  return out;
}

void RequestParser::compact() {
  if (offset_ > (64u << 10) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  } else if (offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
}

std::optional<ParsedRequest> RequestParser::next() {
  while (true) {
    std::size_t cursor = offset_;
    const auto header = line_at(buffer_, cursor);
    if (!header) {
      if (buffer_.size() - offset_ > kMaxHeaderLine) {
        offset_ = buffer_.size();
        compact();
        return FrameError{"frame header too long", true};
      }
      return std::nullopt;
    }
    if (header->empty()) {
      offset_ = cursor;
      compact();
      continue;
    }
    if (header->front() != '*') {
      offset_ = cursor;
      compact();
      return FrameError{"protocol: expected '*'", false};
    }
    const auto count = parse_int<std::int64_t>(header->substr(1));
    if (!count || *count < 1 || static_cast<std::uint64_t>(*count) > kMaxArrayItems) {
      offset_ = cursor;
      compact();
      return FrameError{"protocol: bad array length", false};
    }

    Request request;
    request.reserve(static_cast<std::size_t>(*count));
    for (std::int64_t i = 0; i < *count; ++i) {
      const std::size_t line_start = cursor;
      const auto bulk_header = line_at(buffer_, cursor);
      if (!bulk_header) {
        if (buffer_.size() - line_start > kMaxHeaderLine) {
          offset_ = buffer_.size();
          compact();
          return FrameError{"bulk header too long", true};
        }
        return std::nullopt;
      }
      if (bulk_header->empty() || bulk_header->front() != '$') {
        offset_ = cursor;
        compact();
        return FrameError{"protocol: expected '$'", false};
      }
      const auto len = parse_int<std::int64_t>(bulk_header->substr(1));
      if (!len || *len < 0) {
        offset_ = cursor;
        compact();
        return FrameError{"protocol: bad bulk length", false};
      }
      if (static_cast<std::uint64_t>(*len) > kMaxBulkBytes) {
        offset_ = buffer_.size();
        compact();
        return FrameError{"protocol: bulk string too large", true};
      }
      const auto n = static_cast<std::size_t>(*len);
      if (buffer_.size() - cursor < n + 2) return std::nullopt;
      if (buffer_.compare(cursor + n, 2, "\r\n") != 0) {
        offset_ = cursor;
        compact();
        return FrameError{"protocol: bulk string not terminated", false};
      }
      request.emplace_back(buffer_, cursor, n);
      cursor += n + 2;
    }
    offset_ = cursor;
    compact();
    return request;
  }
}

std::optional<std::string_view> ReplyParser::read_line(std::size_t& cursor) const {
  return line_at(buffer_, cursor);
}

std::optional<Reply> ReplyParser::next() {
  std::size_t cursor = offset_;
  const auto header = read_line(cursor);
  if (!header) return std::nullopt;
  if (header->empty()) throw ProtocolError("empty reply line");

  Reply reply;
  switch (header->front()) {
    case '+':
      reply = Reply::ok();
      break;
    case ':': {
      const auto v = parse_int<std::int64_t>(header->substr(1));
      if (!v) throw ProtocolError("bad integer reply");
      reply = Reply::of_integer(*v);
      break;
    }
    case '-': {
      std::string_view msg = header->substr(1);
      if (msg.starts_with("ERR ")) msg.remove_prefix(4);
      else if (msg == "ERR") msg = {};
      reply = Reply::of_error(std::string(msg));
      break;
    }
    case '*': {
      const auto count = parse_int<std::int64_t>(header->substr(1));
      if (!count || *count < 0 || static_cast<std::uint64_t>(*count) > kMaxArrayItems) {
        throw ProtocolError("bad array reply length");
      }
      std::vector<std::string> items;
      items.reserve(static_cast<std::size_t>(*count));
      for (std::int64_t i = 0; i < *count; ++i) {
        const auto bulk = read_line(cursor);
        if (!bulk) return std::nullopt;
        if (bulk->empty() || bulk->front() != '$') throw ProtocolError("expected bulk string");
        const auto len = parse_int<std::int64_t>(bulk->substr(1));
        if (!len || *len < 0 || static_cast<std::uint64_t>(*len) > kMaxBulkBytes) {
          throw ProtocolError("bad bulk length");
        }
        const auto n = static_cast<std::size_t>(*len);
        if (buffer_.size() - cursor < n + 2) return std::nullopt;
        if (buffer_.compare(cursor + n, 2, "\r\n") != 0) {
          throw ProtocolError("bulk string not terminated");
        }
        items.emplace_back(buffer_, cursor, n);
        cursor += n + 2;
      }
      reply = Reply::of_array(std::move(items));
      break;
    }
    default:
      throw ProtocolError("unknown reply type");
  }

  offset_ = cursor;
  if (offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  } else if (offset_ > (64u << 10) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  return reply;
}

}  // namespace cepless::protocol
