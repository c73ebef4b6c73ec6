#include "cepless/event.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <optional>

#include "cepless/canonical.hpp"

namespace cepless {

namespace {

void append_attr(std::string& out, const AttrValue& value) {
  std::visit(
      [&out](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          canonical::append_string(out, v);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          canonical::append_int(out, v);
        } else {
          canonical::append_double(out, v);
        }
      },
      value);
}

// Token is already known to match -?[0-9]+.
template <typename Int>
bool parse_decimal(std::string_view token, Int& value) {
  const bool negative = token.front() == '-';
  if (negative) {
    if constexpr (std::is_unsigned_v<Int>) return false;
    token.remove_prefix(1);
  }
  Int v = 0;
  for (const char c : token) {
    const Int digit = static_cast<Int>(c - '0');
    if (__builtin_mul_overflow(v, Int{10}, &v)) return false;
    if (negative ? __builtin_sub_overflow(v, digit, &v) : __builtin_add_overflow(v, digit, &v)) {
      return false;
    }
  }
  value = v;
  return true;
}

// Minimal JSON reader for the event shape. Strings and numbers follow RFC 8259.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    throw DecodingError(std::string(key), "event decode error at '" + std::string(key) + "': " + what +
                                 " (offset " + std::to_string(pos_) + ")");
  }

  void skip_ws() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') break;
      ++pos_;
    }
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void expect(char c, std::string_view key) {
    if (peek() != c) fail(key, std::string("expected '") + c + "'");
    ++pos_;
  }

  bool consume(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  // Unescaped strings are returned as views into the input.
  std::string_view read_plain_or(std::string_view key, std::string& scratch) {
    expect('"', key);
    const std::size_t start = pos_;
    bool ascii = true;
    while (pos_ < text_.size()) {
      const unsigned char c = static_cast<unsigned char>(text_[pos_]);
      if (c == '"') {
        const auto view = text_.substr(start, pos_ - start);
        ++pos_;
        if (!ascii && !canonical::is_valid_utf8(view)) fail(key, "string is not valid UTF-8");
        return view;
      }
      if (c == '\\' || c < 0x20) break;
      ascii &= c < 0x80;
      ++pos_;
    }
    pos_ = start - 1;
    scratch = read_string(key);
    return scratch;
  }

  std::string read_string(std::string_view key) {
    expect('"', key);
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) fail(key, "unterminated string");
      const char c = text_[pos_++];
      if (c == '"') break;
      if (static_cast<unsigned char>(c) < 0x20) fail(key, "control character in string");
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos_ >= text_.size()) fail(key, "unterminated escape");
      const char esc = text_[pos_++];
      switch (esc) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case '/': out.push_back('/'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'u': append_code_point(out, read_unicode_escape(key)); break;
        default: fail(key, "invalid escape");
      }
    }
    if (!canonical::is_valid_utf8(out)) fail(key, "string is not valid UTF-8");
    return out;
  }

  // Returns the raw number token and whether it is integral.
  std::pair<std::string_view, bool> read_number(std::string_view key) {
    skip_ws();
    const std::size_t start = pos_;
    bool integral = true;
    if (pos_ < text_.size() && text_[pos_] == '-') ++pos_;
    if (pos_ >= text_.size() || !is_digit(text_[pos_])) fail(key, "expected a number");
    if (text_[pos_] == '0') {
      ++pos_;
    } else {
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      integral = false;
      ++pos_;
      if (pos_ >= text_.size() || !is_digit(text_[pos_])) fail(key, "malformed fraction");
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      integral = false;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ >= text_.size() || !is_digit(text_[pos_])) fail(key, "malformed exponent");
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    }
    return {text_.substr(start, pos_ - start), integral};
  }

  template <typename Int>
  Int read_integer(std::string_view key) {
    const auto [token, integral] = read_number(key);
    if (!integral) fail(key, "expected an integer");
    Int value{};
    if (!parse_decimal(token, value)) fail(key, "integer out of range");
    return value;
  }

  AttrValue read_attr_value(std::string_view key) {
    const char c = peek();
    if (c == '"') {
      std::string scratch;
      const auto view = read_plain_or(key, scratch);
      return scratch.empty() ? std::string(view) : std::move(scratch);
    }
    if (c == '-' || is_digit(c)) {
      const auto [token, integral] = read_number(key);
      if (integral) {
        std::int64_t v{};
        if (!parse_decimal(token, v)) fail(key, "integer out of range");
        return v;
      }
      double d{};
      const auto res = std::from_chars(token.data(), token.data() + token.size(), d);
      if (res.ec != std::errc{}) fail(key, "number out of range");
      return d;
    }
    fail(key, "attribute values must be string, integer or float");
  }

 private:
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  std::uint32_t read_hex4(std::string_view key) {
    if (pos_ + 4 > text_.size()) fail(key, "truncated \\u escape");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const char h = text_[pos_++];
      v <<= 4;
      if (h >= '0' && h <= '9') v |= static_cast<std::uint32_t>(h - '0');
      else if (h >= 'a' && h <= 'f') v |= static_cast<std::uint32_t>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F') v |= static_cast<std::uint32_t>(h - 'A' + 10);
      else fail(key, "invalid \\u escape");
    }
    return v;
  }

  std::uint32_t read_unicode_escape(std::string_view key) {
    std::uint32_t cp = read_hex4(key);
    if (cp >= 0xD800 && cp <= 0xDBFF) {
      if (pos_ + 2 > text_.size() || text_[pos_] != '\\' || text_[pos_ + 1] != 'u') {
        fail(key, "unpaired surrogate");
      }
      pos_ += 2;
      const std::uint32_t low = read_hex4(key);
      if (low < 0xDC00 || low > 0xDFFF) fail(key, "unpaired surrogate");
      cp = 0x10000 + ((cp - 0xD800) << 10) + (low - 0xDC00);
    } else if (cp >= 0xDC00 && cp <= 0xDFFF) {
      fail(key, "unpaired surrogate");
    }
    return cp;
  }

  static void append_code_point(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

namespace {

bool is_plain(std::string_view text) {
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x20 || c >= 0x7F || c == '"' || c == '\\') return false;
  }
  return true;
}

// Events whose strings need no escaping are laid out in a stack buffer and
// appended once. Returns false, leaving `out` untouched, for anything else.
bool encode_plain(std::string& out, const Event& event) {
  char buf[1024];
  char* p = buf;
  char* const limit = buf + sizeof buf - 64;  // room for the seq/ts tail
  const auto put = [&p](std::string_view text) {
    std::memcpy(p, text.data(), text.size());
    p += text.size();
  };
  put("{\"attrs\":{");
  bool first = true;
  for (const auto& [key, value] : event.attrs) {
    if (key.empty() || !is_plain(key)) return false;
    const std::string* text = std::get_if<std::string>(&value);
    const std::size_t value_room = text ? text->size() + 2 : canonical::kMaxDoubleChars;
    if (static_cast<std::size_t>(limit - p) < key.size() + value_room + 4) return false;
    if (!first) *p++ = ',';
    first = false;
    *p++ = '"';
    put(key);
    put("\":");
    if (text) {
      if (!is_plain(*text)) return false;
      *p++ = '"';
      put(*text);
      *p++ = '"';
    } else if (const auto* i = std::get_if<std::int64_t>(&value)) {
      p = std::to_chars(p, limit, *i).ptr;
    } else {
      const double d = std::get<double>(value);
      if (!std::isfinite(d)) return false;
      p = canonical::format_double(p, d);
    }
  }
  put("},\"seq\":");
  p = std::to_chars(p, buf + sizeof buf, event.seq).ptr;
  put(",\"ts\":");
  p = std::to_chars(p, buf + sizeof buf, event.ts_produced).ptr;
  *p++ = '}';
  out.append(buf, p);
  return true;
}

}  // namespace

void encode_event_into(std::string& out, const Event& event) {
  if (encode_plain(out, event)) return;
  try {
    out += "{\"attrs\":{";
    bool first = true;
    for (const auto& [key, value] : event.attrs) {
      if (key.empty()) throw EncodingError("attribute keys must be non-empty");
      if (!first) out.push_back(',');
      first = false;
      canonical::append_string(out, key);
      out.push_back(':');
      append_attr(out, value);
    }
    out += "},\"seq\":";
    canonical::append_uint(out, event.seq);
    out += ",\"ts\":";
    canonical::append_int(out, event.ts_produced);
    out.push_back('}');
  } catch (const canonical::CanonicalError& e) {
    throw EncodingError(std::string("cannot encode event: ") + e.what());
  }
}

std::string encode_event(const Event& event) {
  std::string out;
  out.reserve(64 + event.attrs.size() * 24);
  encode_event_into(out, event);
  return out;
}

namespace {

// Canonical compact layout with unescaped ASCII strings, as produced by
// encode_event. Anything else, valid or not, is left to the general reader.
class FastDecoder {
 public:
  explicit FastDecoder(std::string_view text) : p_(text.data()), end_(text.data() + text.size()) {}

  std::optional<Event> run() {
    Event event;
    if (!literal("{\"attrs\":{")) return std::nullopt;
    if (!literal("}")) {
      auto hint = event.attrs.end();
      const std::string* previous = nullptr;
      do {
        std::string_view key;
        if (!plain_string(key) || key.empty() || !literal(":")) return std::nullopt;
        if (previous != nullptr && !(*previous < key)) return std::nullopt;
        AttrValue value;
        if (p_ < end_ && *p_ == '"') {
          std::string_view text;
          if (!plain_string(text)) return std::nullopt;
          value = std::string(text);
        } else if (!number(value)) {
          return std::nullopt;
        }
        hint = event.attrs.emplace_hint(hint, std::string(key), std::move(value));
        previous = &hint->first;
        hint = event.attrs.end();
      } while (literal(","));
      if (!literal("}")) return std::nullopt;
    }
    std::string_view token;
    if (!literal(",\"seq\":") || !integer_token(token) || token.front() == '-' ||
        !parse_decimal(token, event.seq)) {
      return std::nullopt;
    }
    if (!literal(",\"ts\":") || !integer_token(token) ||
        !parse_decimal(token, event.ts_produced) || !literal("}") || p_ != end_) {
      return std::nullopt;
    }
    return event;
  }

 private:
  bool literal(std::string_view text) {
    if (static_cast<std::size_t>(end_ - p_) < text.size() ||
        std::memcmp(p_, text.data(), text.size()) != 0) {
      return false;
    }
    p_ += text.size();
    return true;
  }

  bool plain_string(std::string_view& out) {
    if (p_ == end_ || *p_ != '"') return false;
    const char* start = ++p_;
    while (p_ != end_) {
      const auto c = static_cast<unsigned char>(*p_);
      if (c == '"') {
        out = std::string_view(start, static_cast<std::size_t>(p_ - start));
        ++p_;
        return true;
      }
      if (c < 0x20 || c >= 0x80 || c == '\\') return false;
      ++p_;
    }
    return false;
  }

  static bool digit(char c) { return c >= '0' && c <= '9'; }

  // -?(0|[1-9][0-9]*)
  bool integer_token(std::string_view& out) {
    const char* start = p_;
    if (p_ != end_ && *p_ == '-') ++p_;
    if (p_ == end_ || !digit(*p_)) return false;
    if (*p_ == '0') {
      ++p_;
    } else {
      while (p_ != end_ && digit(*p_)) ++p_;
    }
    out = std::string_view(start, static_cast<std::size_t>(p_ - start));
    return true;
  }

  bool number(AttrValue& value) {
    const char* start = p_;
    std::string_view token;
    if (!integer_token(token)) return false;
    bool integral = true;
    if (p_ != end_ && *p_ == '.') {
      integral = false;
      ++p_;
      if (p_ == end_ || !digit(*p_)) return false;
      while (p_ != end_ && digit(*p_)) ++p_;
    }
    if (p_ != end_ && (*p_ == 'e' || *p_ == 'E')) {
      integral = false;
      ++p_;
      if (p_ != end_ && (*p_ == '+' || *p_ == '-')) ++p_;
      if (p_ == end_ || !digit(*p_)) return false;
      while (p_ != end_ && digit(*p_)) ++p_;
    }
    if (integral) {
      std::int64_t v{};
      if (!parse_decimal(token, v)) return false;
      value = v;
      return true;
    }
    double d{};
    const auto res = std::from_chars(start, p_, d);
    if (res.ec != std::errc{} || res.ptr != p_) return false;
    value = d;
    return true;
  }

  const char* p_;
  const char* end_;
};

}  // namespace

Event decode_event(std::string_view bytes) {
  if (auto event = FastDecoder(bytes).run()) return std::move(*event);
  Reader reader(bytes);
  Event event;
  bool have_seq = false;
  bool have_ts = false;
  bool have_attrs = false;

  reader.expect('{', "");
  if (!reader.consume('}')) {
    do {
      std::string key_scratch;
      const std::string_view key = reader.read_plain_or("", key_scratch);
      reader.expect(':', key);
      if (key == "seq") {
        if (have_seq) reader.fail(key, "duplicate key");
        event.seq = reader.read_integer<std::uint64_t>(key);
        have_seq = true;
      } else if (key == "ts") {
        if (have_ts) reader.fail(key, "duplicate key");
        event.ts_produced = reader.read_integer<std::int64_t>(key);
        have_ts = true;
      } else if (key == "attrs") {
        if (have_attrs) reader.fail(key, "duplicate key");
        have_attrs = true;
        reader.expect('{', key);
        if (!reader.consume('}')) {
          do {
            std::string name_scratch;
            const std::string_view name = reader.read_plain_or(key, name_scratch);
            if (name.empty()) reader.fail(key, "empty attribute key");
            reader.expect(':', name);
            AttrValue value = reader.read_attr_value(name);
            if (!event.attrs.emplace(std::string(name), std::move(value)).second) {
              reader.fail(key, "duplicate attribute key");
            }
          } while (reader.consume(','));
          reader.expect('}', key);
        }
      } else {
        reader.fail(key, "unknown key");
      }
    } while (reader.consume(','));
    reader.expect('}', "");
  }
  if (!reader.at_end()) reader.fail("", "trailing characters");
  if (!have_seq) throw DecodingError("seq", "event decode error: missing key 'seq'");
  if (!have_ts) throw DecodingError("ts", "event decode error: missing key 'ts'");
  return event;
}

bool is_valid_queue_key(std::string_view name) {
  if (name.empty() || name.size() > 64) return false;
  for (const char c : name) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-')) return false;
  }
  return true;
}

QueueName::QueueName(std::string value) : value_(std::move(value)) {
  const bool suffix_ok = value_.ends_with("-in") || value_.ends_with("-out");
  if (!is_valid_queue_key(value_) || !suffix_ok || stem().empty()) {
    throw std::invalid_argument("invalid queue name: '" + value_ + "'");
  }
}

std::string_view QueueName::stem() const {
  std::string_view v(value_);
  if (v.ends_with("-in")) return v.substr(0, v.size() - 3);
  if (v.ends_with("-out")) return v.substr(0, v.size() - 4);
  return {};
}

bool QueueName::is_input() const { return value_.ends_with("-in"); }

QueuePair QueuePair::for_instance(std::string_view instance_id) {
  const std::string id(instance_id);
  return QueuePair{QueueName(id + "-in"), QueueName(id + "-out")};
}

std::string control_queue_name(std::string_view instance_id, std::uint32_t generation) {
  std::string name(instance_id);
  if (generation > 0) name += "-g" + std::to_string(generation);
  return name + "-ctl";
}

std::string dead_letter_queue_name(std::string_view instance_id) {
  return std::string(instance_id) + "-dlq";
}

}  // namespace cepless
