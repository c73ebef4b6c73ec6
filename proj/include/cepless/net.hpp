#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace cepless::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// Accepts "host:port", ":port" or "port".
  static Address parse(std::string_view text);
  std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }

  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void close() noexcept;
  /// Wakes any thread blocked on this socket without releasing the fd.
  void shutdown() noexcept;

  /// Writes everything or throws NetError.
  void send_all(std::string_view bytes);
  /// Returns 0 on orderly close; throws NetError on failure or timeout.
  std::size_t recv_some(char* buf, std::size_t len);

  void set_recv_timeout(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
};

Socket connect_tcp(const Address& address,
                   std::chrono::milliseconds timeout = std::chrono::seconds(5));
Socket listen_tcp(const Address& address, int backlog = 128);
std::uint16_t local_port(const Socket& socket);

}  // namespace cepless::net
