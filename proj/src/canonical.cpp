#include "cepless/canonical.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>

namespace cepless::canonical {

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= n) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

void append_string(std::string& out, std::string_view text) {
  if (!is_valid_utf8(text)) throw CanonicalError("string is not valid UTF-8");
  static constexpr char kHex[] = "0123456789abcdef";
  out.push_back('"');
  std::size_t plain = 0;
  while (plain < text.size()) {
    const auto c = static_cast<unsigned char>(text[plain]);
    if (c < 0x20 || c == '"' || c == '\\') break;
    ++plain;
  }
  out.append(text.substr(0, plain));
  for (const char ch : text.substr(plain)) {
    const auto c = static_cast<unsigned char>(ch);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20) {
          out += "\\u00";
          out.push_back(kHex[c >> 4]);
          out.push_back(kHex[c & 0xF]);
        } else {
          out.push_back(ch);
        }
    }
  }
  out.push_back('"');
}

char* format_double(char* out, double value) {
  // Shortest round-trip digits come from to_chars; only the layout is ours.
  char sci[40];
  const auto res = std::to_chars(sci, sci + sizeof sci, value, std::chars_format::scientific);
  const char* p = sci;
  if (*p == '-') *out++ = *p++;
  char digits[24];
  int n = 0;
  for (; *p != 'e'; ++p) {
    if (*p != '.') digits[n++] = *p;
  }
  ++p;
  const bool negative_exp = *p == '-';
  ++p;
  int exponent = 0;
  for (; p != res.ptr; ++p) exponent = exponent * 10 + (*p - '0');
  if (negative_exp) exponent = -exponent;

  const auto copy = [&out](const char* from, int count) {
    std::memcpy(out, from, static_cast<std::size_t>(count));
    out += count;
  };
  const auto zeros = [&out](int count) {
    std::memset(out, '0', static_cast<std::size_t>(count));
    out += count;
  };
  if (exponent >= -4 && exponent < 16) {
    if (exponent >= 0) {
      if (n <= exponent + 1) {
        copy(digits, n);
        zeros(exponent + 1 - n);
        copy(".0", 2);
      } else {
        copy(digits, exponent + 1);
        *out++ = '.';
        copy(digits + exponent + 1, n - exponent - 1);
      }
    } else {
      copy("0.", 2);
      zeros(-exponent - 1);
      copy(digits, n);
    }
    return out;
  }
  *out++ = digits[0];
  if (n > 1) {
    *out++ = '.';
    copy(digits + 1, n - 1);
  }
  *out++ = 'e';
  *out++ = negative_exp ? '-' : '+';
  const int magnitude = negative_exp ? -exponent : exponent;
  if (magnitude < 10) *out++ = '0';
  return std::to_chars(out, out + 4, magnitude).ptr;
}

void append_double(std::string& out, double value) {
  if (!std::isfinite(value)) throw CanonicalError("non-finite number");
  char buf[kMaxDoubleChars];
  out.append(buf, format_double(buf, value));
}

void append_int(std::string& out, std::int64_t value) {
  std::array<char, 24> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  out.append(buf.data(), res.ptr);
}

void append_uint(std::string& out, std::uint64_t value) {
  std::array<char, 24> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  out.append(buf.data(), res.ptr);
}

namespace {

void dump_into(std::string& out, const nlohmann::json& value) {
  using value_t = nlohmann::json::value_t;
  switch (value.type()) {
    case value_t::null: out += "null"; break;
    case value_t::boolean: out += value.get<bool>() ? "true" : "false"; break;
    case value_t::number_integer: append_int(out, value.get<std::int64_t>()); break;
    case value_t::number_unsigned: append_uint(out, value.get<std::uint64_t>()); break;
    case value_t::number_float: append_double(out, value.get<double>()); break;
    case value_t::string: append_string(out, value.get_ref<const std::string&>()); break;
    case value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : value) {
        if (!first) out.push_back(',');
        first = false;
        dump_into(out, item);
      }
      out.push_back(']');
      break;
    }
    case value_t::object: {
      // nlohmann's default object type is an ordered std::map, so iteration
      // is already in byte order of the keys.
      out.push_back('{');
      bool first = true;
      for (const auto& [key, item] : value.items()) {
        if (!first) out.push_back(',');
        first = false;
        append_string(out, key);
        out.push_back(':');
        dump_into(out, item);
      }
      out.push_back('}');
      break;
    }
    default:
      throw CanonicalError("unsupported JSON value");
  }
}

}  // namespace

std::string dump(const nlohmann::json& value) {
  std::string out;
  dump_into(out, value);
  return out;
}

nlohmann::json parse(std::string_view text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CanonicalError(e.what());
  }
}

}  // namespace cepless::canonical
