#include "gridfs/net/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "gridfs/error.hpp"

namespace gridfs::net {

namespace {
std::string errno_text() { return std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  int rc = ::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || !res) {
    throw Error(Errc::ConnectionLost, "cannot resolve " + ep.host + ": " + gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(ep.port);
  return addr;
}
}  // namespace

Endpoint Endpoint::parse(std::string_view text, std::uint16_t default_port) {
  Endpoint ep;
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    ep.host = std::string(text);
    ep.port = default_port;
  } else {
    ep.host = std::string(text.substr(0, colon));
    auto port_text = text.substr(colon + 1);
    unsigned long port = 0;
    try {
      std::size_t used = 0;
      port = std::stoul(std::string(port_text), &used);
      if (used != port_text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "bad port in '" + std::string(text) + "'");
    }
    if (port > 65535) throw Error(Errc::InvalidArgument, "port out of range");
    ep.port = static_cast<std::uint16_t>(port);
  }
  if (ep.host.empty()) ep.host = "127.0.0.1";
  return ep;
}

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

Socket Socket::connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  sockaddr_in addr = resolve(ep);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(Errc::ConnectionLost, "socket: " + errno_text());

  int flags = ::fcntl(s.fd_, F_GETFL, 0);
  ::fcntl(s.fd_, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    throw Error(Errc::ConnectionLost, "connect " + ep.str() + ": " + errno_text());
  }
  if (rc != 0) {
    pollfd pfd{s.fd_, POLLOUT, 0};
    rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc <= 0) throw Error(Errc::ConnectionLost, "connect " + ep.str() + ": timeout");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(s.fd_, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw Error(Errc::ConnectionLost, "connect " + ep.str() + ": " + std::strerror(err));
    }
  }
  ::fcntl(s.fd_, F_SETFL, flags);
  int one = 1;
  ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

void Socket::send_all(ByteView a, ByteView b) {
  iovec iov[2]{{const_cast<std::uint8_t*>(a.data()), a.size()},
               {const_cast<std::uint8_t*>(b.data()), b.size()}};
  int iovcnt = b.empty() ? 1 : 2;
  iovec* cur = iov;
  while (iovcnt > 0) {
    if (cur->iov_len == 0) {
      ++cur;
      --iovcnt;
      continue;
    }
    msghdr msg{};
    msg.msg_iov = cur;
    msg.msg_iovlen = static_cast<std::size_t>(iovcnt);
    ssize_t n = ::sendmsg(fd_, &msg, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::ConnectionLost, "send: " + errno_text());
    }
    auto left = static_cast<std::size_t>(n);
    while (iovcnt > 0 && left >= cur->iov_len) {
      left -= cur->iov_len;
      ++cur;
      --iovcnt;
    }
    if (iovcnt > 0) {
      cur->iov_base = static_cast<std::uint8_t*>(cur->iov_base) + left;
      cur->iov_len -= left;
    }
  }
}

void Socket::recv_exact(std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
    if (n == 0) throw Error(Errc::ConnectionLost, "peer closed connection");
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::ConnectionLost, "recv: " + errno_text());
    }
    got += static_cast<std::size_t>(n);
  }
}

void Socket::set_buffer_sizes(std::uint32_t bytes) {
  int v = static_cast<int>(bytes);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &v, sizeof(v));
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &v, sizeof(v));
}

void Socket::set_recv_timeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

void Socket::shutdown_read() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RD);
}

void Socket::shutdown_both() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Listener::~Listener() { close(); }

Listener::Listener(Listener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
  other.fd_ = -1;
}

Listener& Listener::operator=(Listener&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    port_ = other.port_;
    other.fd_ = -1;
  }
  return *this;
}

Listener Listener::bind(const std::string& host, std::uint16_t port) {
  Listener l;
  l.fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (l.fd_ < 0) throw Error(Errc::BindFailed, "socket: " + errno_text());
  int one = 1;
  ::setsockopt(l.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw Error(Errc::BindFailed, "bad listen address " + host);
  }
  if (::bind(l.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw Error(Errc::BindFailed, host + ":" + std::to_string(port) + ": " + errno_text());
  }
  if (::listen(l.fd_, 128) != 0) throw Error(Errc::BindFailed, "listen: " + errno_text());
  socklen_t len = sizeof(addr);
  ::getsockname(l.fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  l.port_ = ntohs(addr.sin_port);
  return l;
}

std::optional<Socket> Listener::accept(std::chrono::milliseconds timeout) {
  if (fd_ < 0) return std::nullopt;
  pollfd pfd{fd_, POLLIN, 0};
  int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) return std::nullopt;
  int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return Socket(fd);
}

void Listener::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace gridfs::net
