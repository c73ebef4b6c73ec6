#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>

#include "cepless/event.hpp"

namespace testing_util {

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len) {
  static const char* const kPieces[] = {"a", "z", "0", " ", "\"", "\\", "\n", "\t", "\x01",
                                        "\x1f", "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9d\x84\x9e",
                                        "/", "\x7f"};
  const std::size_t len = rng() % (max_len + 1);
  std::string out;
  for (std::size_t i = 0; i < len; ++i) out += kPieces[rng() % std::size(kPieces)];
  return out;
}

inline double random_double(std::mt19937_64& rng) {
  switch (rng() % 6) {
    case 0:
      return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    case 1:
      return static_cast<double>(static_cast<std::int64_t>(rng() % 2000001) - 1000000);
    case 2: {
      double d;
      std::uint64_t bits = rng();
      // Keep the exponent away from inf/nan.
      bits &= ~(std::uint64_t{0x7FF} << 52);
      bits |= (rng() % 0x7FF) << 52;
      std::memcpy(&d, &bits, sizeof d);
      return d;
    }
    case 3:
      return std::ldexp(static_cast<double>(rng() % 1000), static_cast<int>(rng() % 120) - 60);
    case 4:
      return -static_cast<double>(rng() >> 11) * 0x1.0p-40;
    default:
      return (rng() % 2 == 0) ? 0.0 : -0.0;
  }
}

inline cepless::Event random_event(std::mt19937_64& rng, std::uint64_t seq) {
  cepless::Event e;
  e.seq = seq;
  e.ts_produced = static_cast<std::int64_t>(rng());
  const std::size_t n = rng() % 6;
  for (std::size_t i = 0; i < n; ++i) {
    std::string key = random_string(rng, 6);
    if (key.empty()) key = "k";
    switch (rng() % 3) {
      case 0:
        e.attrs[key] = random_string(rng, 12);
        break;
      case 1:
        e.attrs[key] = static_cast<std::int64_t>(rng());
        break;
      default:
        e.attrs[key] = random_double(rng);
    }
  }
  return e;
}

inline bool wait_until(const std::function<bool()>& pred,
                       std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return pred();
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cepless-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_util
