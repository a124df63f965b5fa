#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <string>

#include "rscnet/error.hpp"

namespace rscnet::stream {

class TransportError : public Error {
 public:
  using Error::Error;
};

// Write side of a reliable ordered byte stream. write() delivers the whole
// buffer or, on failure, none of it, and throws TransportError.
class ByteSink {
 public:
  virtual ~ByteSink() = default;
  virtual void write(std::span<const std::uint8_t> bytes) = 0;
  virtual void close() {}
};

// Read side. read() blocks until at least one byte is available and returns 0
// at end of stream.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::size_t read(std::span<std::uint8_t> out) = 0;
};

// In-memory pipe shared by a LoopbackSink and a LoopbackSource.
class Loopback {
 public:
  // Writes fail and close the pipe after `write_limit` successful write()
  // calls, simulating a link that drops. 0 means unlimited.
  explicit Loopback(std::size_t write_limit = 0) : write_limit_(write_limit) {}

  void write(std::span<const std::uint8_t> bytes);
  std::size_t read(std::span<std::uint8_t> out);
  void close();
  std::size_t size() const;
  std::size_t writes() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::uint8_t> bytes_;
  std::size_t write_limit_;
  std::size_t writes_ = 0;
  bool closed_ = false;
};

class LoopbackSink : public ByteSink {
 public:
  explicit LoopbackSink(std::shared_ptr<Loopback> pipe) : pipe_(std::move(pipe)) {}
  void write(std::span<const std::uint8_t> bytes) override { pipe_->write(bytes); }
  void close() override { pipe_->close(); }

 private:
  std::shared_ptr<Loopback> pipe_;
};

class LoopbackSource : public ByteSource {
 public:
  explicit LoopbackSource(std::shared_ptr<Loopback> pipe) : pipe_(std::move(pipe)) {}
  std::size_t read(std::span<std::uint8_t> out) override { return pipe_->read(out); }

 private:
  std::shared_ptr<Loopback> pipe_;
};

// Connected TCP socket.
class TcpStream : public ByteSink, public ByteSource {
 public:
  explicit TcpStream(int fd) : fd_(fd) {}
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  ~TcpStream() override;

  void write(std::span<const std::uint8_t> bytes) override;
  std::size_t read(std::span<std::uint8_t> out) override;
  void close() override;
  // Ends pending and future reads with end-of-stream.
  void shutdown_read();
  int fd() const { return fd_; }

 private:
  int fd_;
};

// "host:port"; host may be empty for all interfaces.
struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};
Endpoint parse_endpoint(const std::string& text);

std::unique_ptr<TcpStream> tcp_connect(const Endpoint& ep);

class TcpListener {
 public:
  explicit TcpListener(const Endpoint& ep);
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener();

  // Port actually bound (useful with port 0).
  std::uint16_t port() const { return port_; }
  // Blocks for the next connection; returns nullptr once stop() was called.
  std::unique_ptr<TcpStream> accept();
  // Async-signal-safe: wakes a blocked accept().
  void stop();
  bool stopped() const { return stopped_; }

 private:
  int fd_;
  std::uint16_t port_;
  std::atomic<bool> stopped_{false};
};

}  // namespace rscnet::stream
