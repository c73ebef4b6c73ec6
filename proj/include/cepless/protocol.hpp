#pragma once

// Length-prefixed frame protocol spoken by the queue server and the node
// manager control port.
//
//   request : *<n>\r\n followed by n bulk strings $<len>\r\n<bytes>\r\n
//   reply   : +OK\r\n | :<int>\r\n | -ERR <msg>\r\n | an array frame
//
// Both ends pipeline freely; replies come back in request order.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cepless::protocol {

/// Verb followed by its arguments, all as raw bytes.
using Request = std::vector<std::string>;

inline constexpr std::size_t kMaxBulkBytes = 64u << 20;
inline constexpr std::size_t kMaxArrayItems = 1u << 20;

struct Reply {
  enum class Kind { kOk, kInteger, kError, kArray };

  Kind kind = Kind::kOk;
  std::int64_t integer = 0;
  std::string error;
  std::vector<std::string> items;

  static Reply ok() { return {}; }
  static Reply of_integer(std::int64_t v) {
    Reply r;
    r.kind = Kind::kInteger;
    r.integer = v;
    return r;
  }
  static Reply of_error(std::string msg) {
    Reply r;
    r.kind = Kind::kError;
    r.error = std::move(msg);
    return r;
  }
  static Reply of_array(std::vector<std::string> items) {
    Reply r;
    r.kind = Kind::kArray;
    r.items = std::move(items);
    return r;
  }

  bool is_error() const { return kind == Kind::kError; }

  friend bool operator==(const Reply&, const Reply&) = default;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void append_request(std::string& out, const Request& request);
void append_bulk(std::string& out, std::string_view bytes);
void append_array_header(std::string& out, std::size_t n);
/// Same bytes as append_request for {"PUSH", queue, payload}.
void append_push(std::string& out, std::string_view queue, std::string_view payload);
void append_reply(std::string& out, const Reply& reply);

std::string to_string(const Reply& reply);

/// A malformed request. `fatal` means the stream cannot be resynchronised.
struct FrameError {
  std::string message;
  bool fatal = false;
};

using ParsedRequest = std::variant<Request, FrameError>;

/// Incremental request parser. Feed bytes as they arrive and drain complete
/// frames with next(). A malformed header line yields a FrameError and the
/// parser skips past that line, so the connection can stay open.
class RequestParser {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  std::optional<ParsedRequest> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::optional<std::string_view> read_line();
  void compact();

  std::string buffer_;
  std::size_t offset_ = 0;
};

/// Incremental reply parser; throws ProtocolError on malformed input since a
/// client cannot recover from a corrupt reply stream.
class ReplyParser {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  std::optional<Reply> next();

 private:
  std::optional<std::string_view> read_line(std::size_t& cursor) const;

  std::string buffer_;
  std::size_t offset_ = 0;
};

}  // namespace cepless::protocol
