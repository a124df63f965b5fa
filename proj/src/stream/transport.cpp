#include "rscnet/stream/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <fmt/format.h>

namespace rscnet::stream {

void Loopback::write(std::span<const std::uint8_t> bytes) {
  {
    std::lock_guard lock(mu_);
    if (closed_) throw TransportError("loopback closed");
    if (write_limit_ != 0 && writes_ >= write_limit_) {
      closed_ = true;
      cv_.notify_all();
      throw TransportError("loopback write limit reached");
    }
    bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
    ++writes_;
  }
  cv_.notify_all();
}

std::size_t Loopback::read(std::span<std::uint8_t> out) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closed_ || !bytes_.empty(); });
  const std::size_t n = std::min(out.size(), bytes_.size());
  std::copy_n(bytes_.begin(), n, out.begin());
  bytes_.erase(bytes_.begin(), bytes_.begin() + static_cast<std::ptrdiff_t>(n));
  return n;
}

void Loopback::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::size_t Loopback::size() const {
  std::lock_guard lock(mu_);
  return bytes_.size();
}

std::size_t Loopback::writes() const {
  std::lock_guard lock(mu_);
  return writes_;
}

TcpStream::~TcpStream() { close(); }

void TcpStream::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void TcpStream::write(std::span<const std::uint8_t> bytes) {
  if (fd_ < 0) throw TransportError("socket closed");
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      const int err = errno;
      // The peer may hold a prefix of this frame; the connection is no
      // longer usable, so drop it rather than let a later frame follow it.
      close();
      throw TransportError(fmt::format("send failed after {} of {} bytes: {}", done, bytes.size(), std::strerror(err)));
    }
    done += static_cast<std::size_t>(n);
  }
}

void TcpStream::shutdown_read() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RD);
}

std::size_t TcpStream::read(std::span<std::uint8_t> out) {
  if (fd_ < 0) return 0;
  for (;;) {
    const ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno != EINTR) throw TransportError(fmt::format("recv failed: {}", std::strerror(errno)));
  }
}

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  check_config(colon != std::string::npos, fmt::format("endpoint '{}' must be host:port", text));
  Endpoint ep;
  ep.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    check_config(used == port.size() && p >= 0 && p <= 65535, "");
    ep.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("endpoint '{}' has an invalid port", text));
  }
  return ep;
}

namespace {

addrinfo* resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) throw TransportError(fmt::format("cannot resolve '{}': {}", ep.host, ::gai_strerror(rc)));
  return res;
}

}  // namespace

std::unique_ptr<TcpStream> tcp_connect(const Endpoint& ep) {
  addrinfo* res = resolve(ep, false);
  int fd = -1;
  int err = 0;
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    err = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError(fmt::format("connect to {}:{} failed: {}", ep.host, ep.port, std::strerror(err)));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<TcpStream>(fd);
}

TcpListener::TcpListener(const Endpoint& ep) {
  addrinfo* res = resolve(ep, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    throw TransportError(fmt::format("socket failed: {}", std::strerror(errno)));
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const int bound = ::bind(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (bound != 0 || ::listen(fd_, 16) != 0) {
    const int err = errno;
    ::close(fd_);
    throw TransportError(fmt::format("cannot listen on {}:{}: {}", ep.host, ep.port, std::strerror(err)));
  }
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { ::close(fd_); }

std::unique_ptr<TcpStream> TcpListener::accept() {
  for (;;) {
    if (stopped_) return nullptr;
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<TcpStream>(fd);
    if (stopped_) return nullptr;
    if (errno != EINTR) throw TransportError(fmt::format("accept failed: {}", std::strerror(errno)));
  }
}

void TcpListener::stop() {
  stopped_ = true;
  ::shutdown(fd_, SHUT_RDWR);
}

}  // namespace rscnet::stream
