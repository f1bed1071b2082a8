#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>

#include "hypersched/errors.hpp"

namespace hypersched {

// Blocking line-oriented TCP stream. Writes are internally locked so a
// heartbeat thread can share the socket with the request loop.
class LineStream {
 public:
  explicit LineStream(int fd) : fd_(fd) {}
  ~LineStream() { close(); }
  LineStream(const LineStream&) = delete;
  LineStream& operator=(const LineStream&) = delete;

  int fd() const { return fd_; }
  bool is_open() const { return fd_ >= 0; }

  // Reads one newline-terminated line (terminator stripped). Returns false
  // on EOF or error.
  bool read_line(std::string& out) {
    out.clear();
    while (true) {
      const auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        out = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        if (!out.empty() && out.back() == '\r') out.pop_back();
        return true;
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n <= 0) return false;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  bool write_line(const std::string& line_with_newline) {
    std::lock_guard<std::mutex> lock(write_mutex_);
    std::size_t sent = 0;
    while (sent < line_with_newline.size()) {
      const ssize_t n = ::send(fd_, line_with_newline.data() + sent,
                               line_with_newline.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return false;
      sent += static_cast<std::size_t>(n);
    }
    return true;
  }

  void shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  std::string buffer_;
  std::mutex write_mutex_;
};

class TcpListener {
 public:
  TcpListener(const std::string& host, int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error("socket: " + std::string(std::strerror(errno)));
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd_);
      throw Error("invalid listen address " + host);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      throw Error("bind " + host + ":" + std::to_string(port) + ": " + why);
    }
    if (::listen(fd_, 64) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      throw Error("listen: " + why);
    }
  }

  ~TcpListener() { close(); }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int local_port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
      throw Error("getsockname failed");
    }
    return ntohs(addr.sin_port);
  }

  // Returns -1 once the listener has been closed.
  int accept_fd() {
    return ::accept(fd_, nullptr, nullptr);
  }

  void close() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

// Connects to host:port; returns -1 on failure.
inline int tcp_connect(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return -1;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    hostent* he = ::gethostbyname(host.c_str());
    if (he == nullptr || he->h_addrtype != AF_INET) {
      ::close(fd);
      return -1;
    }
    std::memcpy(&addr.sin_addr, he->h_addr_list[0], sizeof(addr.sin_addr));
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    return -1;
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

}  // namespace hypersched
