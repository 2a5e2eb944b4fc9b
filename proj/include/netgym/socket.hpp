#pragma once

// Blocking POSIX TCP plumbing used by both the environment server and the
// agent client.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>

#include "netgym/error.hpp"
#include "netgym/wire.hpp"

namespace netgym {

class FileDescriptor {
 public:
  FileDescriptor() = default;
  explicit FileDescriptor(int fd) noexcept : fd_(fd) {}
  FileDescriptor(FileDescriptor&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  FileDescriptor& operator=(FileDescriptor&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  FileDescriptor(const FileDescriptor&) = delete;
  FileDescriptor& operator=(const FileDescriptor&) = delete;
  ~FileDescriptor() { reset(); }

  int get() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

/// Result of reading one frame from a stream.
enum class ReadStatus { kFrame, kClosed, kTruncated, kOversized };

class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(FileDescriptor fd) : fd_(std::move(fd)) {
    int one = 1;
    ::setsockopt(fd_.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }

  bool is_open() const noexcept { return fd_.valid(); }
  void close() noexcept { fd_.reset(); }
  int native_handle() const noexcept { return fd_.get(); }

  void write_all(std::string_view bytes) {
    while (!bytes.empty()) {
      const ssize_t n = ::send(fd_.get(), bytes.data(), bytes.size(), MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("send"));
      }
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  /// Reads up to `want` bytes; returns how many arrived before EOF.
  std::size_t read_some_exact(char* out, std::size_t want) {
    std::size_t got = 0;
    while (got < want) {
      const ssize_t n = ::recv(fd_.get(), out + got, want - got, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == ECONNRESET) return got;
        throw TransportError(errno_text("recv"));
      }
      if (n == 0) return got;
      got += static_cast<std::size_t>(n);
    }
    return got;
  }

  ReadStatus read_frame(std::string& payload) {
    char header[kFrameHeaderSize];
    const std::size_t h = read_some_exact(header, sizeof header);
    if (h == 0) return ReadStatus::kClosed;
    if (h < sizeof header) return ReadStatus::kTruncated;
    const std::uint32_t len = get_u32be(std::string_view(header, sizeof header));
    if (len > kMaxFrameSize) return ReadStatus::kOversized;
    payload.resize(len);
    if (read_some_exact(payload.data(), len) < len) return ReadStatus::kTruncated;
    return ReadStatus::kFrame;
  }

  void write_message(const Message& m) { write_all(encode(m)); }

 private:
  FileDescriptor fd_;
};

class TcpListener {
 public:
  /// Binds and listens immediately, so connections queue before accept().
  TcpListener(const std::string& host, std::uint16_t port) {
    fd_ = FileDescriptor(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd_.valid()) throw StartupError(errno_text("socket"));
    int one = 1;
    ::setsockopt(fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      throw StartupError("invalid bind address '" + host + "'");
    }
    if (::bind(fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw StartupError(errno_text("bind"));
    }
    if (::listen(fd_.get(), 1) != 0) throw StartupError(errno_text("listen"));
    socklen_t len = sizeof addr;
    ::getsockname(fd_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const noexcept { return port_; }

  TcpStream accept() {
    for (;;) {
      const int fd = ::accept4(fd_.get(), nullptr, nullptr, SOCK_CLOEXEC);
      if (fd >= 0) return TcpStream(FileDescriptor(fd));
      if (errno == EINTR) continue;
      throw TransportError(errno_text("accept"));
    }
  }

 private:
  FileDescriptor fd_;
  std::uint16_t port_ = 0;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 5555;
};

/// Accepts "tcp://host:port", "host:port" or a bare port.
inline Endpoint parse_endpoint(std::string_view text) {
  Endpoint ep;
  if (text.starts_with("tcp://")) text.remove_prefix(6);
  std::string_view port_text = text;
  if (auto colon = text.rfind(':'); colon != std::string_view::npos) {
    ep.host = std::string(text.substr(0, colon));
    port_text = text.substr(colon + 1);
  }
  unsigned long port = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535 || ep.host.empty()) {
    throw StartupError("invalid endpoint '" + std::string(text) + "'");
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

/// Non-blocking connect bounded by `timeout`; StartupError on failure.
inline TcpStream connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw StartupError("cannot resolve '" + ep.host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof addr);
  ::freeaddrinfo(res);

  FileDescriptor fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!fd.valid()) throw StartupError(errno_text("socket"));
  const std::string where = ep.host + ":" + port;
  if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno != EINPROGRESS) throw StartupError("connect to " + where + " failed: " + std::strerror(errno));
    pollfd p{fd.get(), POLLOUT, 0};
    int rc = 0;
    do {
      rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    } while (rc < 0 && errno == EINTR);
    if (rc == 0) throw StartupError("connect to " + where + " timed out");
    if (rc < 0) throw StartupError(errno_text("poll"));
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw StartupError("connect to " + where + " failed: " + std::strerror(err));
  }
  const int flags = ::fcntl(fd.get(), F_GETFL);
  ::fcntl(fd.get(), F_SETFL, flags & ~O_NONBLOCK);
  return TcpStream(std::move(fd));
}

}  // namespace netgym
