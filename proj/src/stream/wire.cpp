#include "rscnet/stream/wire.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "rscnet/bytes.hpp"

namespace rscnet::stream {

namespace {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

// Validates the fixed header and returns the payload length.
std::size_t check_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes)
    throw FrameError(FrameFault::truncated, fmt::format("frame truncated: {} bytes, header needs {}", bytes.size(), kHeaderBytes));
  if (!std::equal(kFrameMagic.begin(), kFrameMagic.end(), bytes.begin()))
    throw FrameError(FrameFault::magic, "bad frame magic");
  if (bytes[4] != kWireVersion)
    throw FrameError(FrameFault::version, fmt::format("unsupported wire version {} (expected {})", bytes[4], kWireVersion));
  const std::size_t len = bytes::get_be<std::uint16_t>(bytes.data() + 15);
  if (len % 4 != 0) throw FrameError(FrameFault::length, fmt::format("payload length {} is not a multiple of 4", len));
  return len;
}

}  // namespace

const char* fault_name(FrameFault f) {
  switch (f) {
    case FrameFault::magic: return "magic";
    case FrameFault::version: return "version";
    case FrameFault::crc: return "crc";
    case FrameFault::truncated: return "truncated";
    case FrameFault::length: return "length";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode_frame(const WireFrame& frame) {
  const std::size_t len = 4 * frame.payload.size();
  check_config(len <= std::numeric_limits<std::uint16_t>::max(),
               fmt::format("payload of {} floats overflows the 16-bit length field", frame.payload.size()));
  std::vector<std::uint8_t> out(kFrameMagic.begin(), kFrameMagic.end());
  out.reserve(frame_size(frame.payload.size()));
  out.push_back(kWireVersion);
  bytes::put_be(out, frame.session_id);
  bytes::put_be(out, frame.sample_id);
  bytes::put_be(out, frame.window_index);
  bytes::put_be(out, static_cast<std::uint16_t>(len));
  for (float v : frame.payload) bytes::put_f32_le(out, v);
  bytes::put_be(out, crc32_of(out));
  return out;
}

WireFrame decode_frame(std::span<const std::uint8_t> bytes) {
  const std::size_t len = check_header(bytes);
  const std::size_t total = kHeaderBytes + len + kCrcBytes;
  if (bytes.size() < total)
    throw FrameError(FrameFault::truncated, fmt::format("frame truncated: {} of {} bytes", bytes.size(), total));
  if (bytes.size() > total)
    throw FrameError(FrameFault::length, fmt::format("{} trailing bytes after frame", bytes.size() - total));
  const std::uint32_t stored = bytes::get_be<std::uint32_t>(bytes.data() + kHeaderBytes + len);
  if (stored != crc32_of(bytes.first(kHeaderBytes + len))) throw FrameError(FrameFault::crc, "frame CRC mismatch");

  WireFrame f;
  f.session_id = bytes::get_be<std::uint32_t>(bytes.data() + 5);
  f.sample_id = bytes::get_be<std::uint32_t>(bytes.data() + 9);
  f.window_index = bytes::get_be<std::uint16_t>(bytes.data() + 13);
  f.payload.resize(len / 4);
  for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] = bytes::get_f32_le(bytes.data() + kHeaderBytes + 4 * i);
  return f;
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ * 2 >= buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<WireFrame> FrameReader::next() {
  std::span<const std::uint8_t> pending(buffer_.data() + offset_, buffer_.size() - offset_);
  if (pending.size() < kHeaderBytes) {
    // Reject a bad magic as soon as it is visible.
    const std::size_t n = std::min(pending.size(), kFrameMagic.size());
    if (!std::equal(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(n), kFrameMagic.begin()))
      throw FrameError(FrameFault::magic, "bad frame magic");
    return std::nullopt;
  }
  const std::size_t total = kHeaderBytes + check_header(pending) + kCrcBytes;
  if (pending.size() < total) return std::nullopt;
  WireFrame f = decode_frame(pending.first(total));
  offset_ += total;
  return f;
}

}  // namespace rscnet::stream
