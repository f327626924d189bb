#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "gridfs/bytes.hpp"

namespace gridfs::net {

struct Endpoint {
  std::string host{"127.0.0.1"};
  std::uint16_t port{2525};

  // "host:port"; a bare host uses the default port.
  static Endpoint parse(std::string_view text, std::uint16_t default_port = 2525);
  std::string str() const { return host + ":" + std::to_string(port); }
  bool operator==(const Endpoint&) const = default;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  // Throws Error(ConnectionLost) when the peer cannot be reached.
  static Socket connect(const Endpoint& ep,
                        std::chrono::milliseconds timeout = std::chrono::seconds(10));

  // Both throw Error(ConnectionLost) on EOF, reset or timeout.
  void send_all(ByteView a, ByteView b = {});
  void recv_exact(std::span<std::uint8_t> out);

  void set_buffer_sizes(std::uint32_t bytes);
  void set_recv_timeout(std::chrono::milliseconds timeout);
  void shutdown_read() noexcept;
  void shutdown_both() noexcept;
  void close() noexcept;

  bool valid() const noexcept { return fd_ >= 0; }
  int fd() const noexcept { return fd_; }

 private:
  int fd_{-1};
};

class Listener {
 public:
  Listener() = default;
  ~Listener();
  Listener(Listener&& other) noexcept;
  Listener& operator=(Listener&& other) noexcept;
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  // Port 0 binds an ephemeral port. Throws Error(BindFailed).
  static Listener bind(const std::string& host, std::uint16_t port);

  std::uint16_t port() const noexcept { return port_; }
  // Waits up to `timeout`; nullopt on timeout.
  std::optional<Socket> accept(std::chrono::milliseconds timeout);
  void close() noexcept;

 private:
  int fd_{-1};
  std::uint16_t port_{0};
};

}  // namespace gridfs::net
