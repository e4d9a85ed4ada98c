#pragma once

// Blocking TCP sockets with poll-based timeouts. IPv4 loopback/hostname only,
// which covers forwarded debug ports and the command listener.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <utility>

#include "droidmeter/errors.hpp"

namespace droidmeter::net {

namespace detail {
inline std::string errno_text() { return std::strerror(errno); }
}

class TcpSocket {
 public:
  TcpSocket() = default;
  explicit TcpSocket(int fd) : fd_(fd) {}
  TcpSocket(const TcpSocket&) = delete;
  TcpSocket& operator=(const TcpSocket&) = delete;
  TcpSocket(TcpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  TcpSocket& operator=(TcpSocket&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = other.fd_;
      other.fd_ = -1;
    }
    return *this;
  }
  ~TcpSocket() { close(); }

  static TcpSocket connect(const std::string& host, std::uint16_t port, int timeout_ms = 5000) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
      throw NetError("cannot resolve " + host);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      freeaddrinfo(res);
      throw NetError("socket: " + detail::errno_text());
    }
    int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    freeaddrinfo(res);
    if (rc != 0) {
      ::close(fd);
      throw NetError("connect " + host + ":" + service + ": " + detail::errno_text());
    }
    (void)timeout_ms;
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return TcpSocket(fd);
  }

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  // True when readable within timeout; false on timeout.
  bool wait_readable(int timeout_ms) const {
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc < 0) {
      if (errno == EINTR) return false;
      throw NetError("poll: " + detail::errno_text());
    }
    return rc > 0;
  }

  // Reads up to max bytes. Empty string means orderly close. Nullopt on timeout.
  std::optional<std::string> recv_some(size_t max, int timeout_ms) const {
    if (!wait_readable(timeout_ms)) return std::nullopt;
    std::string buf(max, '\0');
    ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return std::nullopt;
      throw NetError("recv: " + detail::errno_text());
    }
    buf.resize(static_cast<size_t>(n));
    return buf;
  }

  void send_all(std::string_view data) const {
    size_t sent = 0;
    while (sent < data.size()) {
      ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw NetError("send: " + detail::errno_text());
      }
      sent += static_cast<size_t>(n);
    }
  }

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  TcpListener() = default;
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  TcpListener(TcpListener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
    other.fd_ = -1;
  }
  ~TcpListener() { close(); }

  // Binds 127.0.0.1:port; port 0 picks an ephemeral port.
  static TcpListener bind(std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw NetError("socket: " + detail::errno_text());
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      std::string err = detail::errno_text();
      bool in_use = errno == EADDRINUSE;
      ::close(fd);
      if (in_use) throw PortInUse("port " + std::to_string(port) + " already in use");
      throw NetError("bind: " + err);
    }
    if (::listen(fd, 8) != 0) {
      std::string err = detail::errno_text();
      ::close(fd);
      throw NetError("listen: " + err);
    }
    socklen_t len = sizeof(addr);
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    TcpListener listener;
    listener.fd_ = fd;
    listener.port_ = ntohs(addr.sin_port);
    return listener;
  }

  // Nullopt on timeout.
  std::optional<TcpSocket> accept(int timeout_ms) const {
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc < 0) {
      if (errno == EINTR) return std::nullopt;
      throw NetError("poll: " + detail::errno_text());
    }
    if (rc == 0) return std::nullopt;
    int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return std::nullopt;
      throw NetError("accept: " + detail::errno_text());
    }
    int one = 1;
    setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return TcpSocket(client);
  }

  std::uint16_t port() const { return port_; }
  bool valid() const { return fd_ >= 0; }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Reserves an ephemeral port by binding and immediately releasing it. Used
// when an external process (adb) needs a concrete local port number.
inline std::uint16_t pick_free_port() {
  TcpListener probe = TcpListener::bind(0);
  return probe.port();
}

}  // namespace droidmeter::net
