#pragma once

// Canonical text form shared by events, registry manifests, metrics documents
// and control-protocol responses: a JSON object with lexicographically sorted
// keys, no insignificant whitespace, raw UTF-8, and numbers in their shortest
// round-trip form. The byte layout matches Python's
// json.dumps(v, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
// which makes it straightforward to reproduce from any language.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace cepless::canonical {

class CanonicalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_valid_utf8(std::string_view text);

/// Appends `text` as a quoted string. Throws CanonicalError on invalid UTF-8.
void append_string(std::string& out, std::string_view text);

/// Appends `value` in shortest round-trip form, always distinguishable from
/// an integer ("1.0", "1e+20", "0.0001", "1e-05"). Throws CanonicalError for
/// NaN and infinities.
void append_double(std::string& out, double value);

/// Longest output of format_double.
inline constexpr std::size_t kMaxDoubleChars = 32;
/// Writes a finite `value` as append_double does; returns the end pointer.
char* format_double(char* out, double value);

void append_int(std::string& out, std::int64_t value);
void append_uint(std::string& out, std::uint64_t value);

/// Canonical rendering of an arbitrary JSON document.
std::string dump(const nlohmann::json& value);

/// Parses a text document; throws CanonicalError on malformed input.
nlohmann::json parse(std::string_view text);

}  // namespace cepless::canonical
