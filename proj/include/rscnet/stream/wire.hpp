#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rscnet/error.hpp"

// Framing of compressed windows on the edge->cloud byte stream.
//
//   offset  size  field
//   0       4     magic "RSCW"
//   4       1     version
//   5       4     session_id    (big-endian)
//   9       4     sample_id     (big-endian)
//   13      2     window_index  (big-endian)
//   15      2     payload_len   (big-endian, bytes)
//   17      n     payload       (float32, little-endian)
//   17+n    4     crc32 of bytes [0, 17+n) (big-endian)
namespace rscnet::stream {

inline constexpr std::array<std::uint8_t, 4> kFrameMagic = {'R', 'S', 'C', 'W'};
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderBytes = 17;
inline constexpr std::size_t kCrcBytes = 4;

struct WireFrame {
  std::uint32_t session_id = 0;
  std::uint32_t sample_id = 0;
  std::uint16_t window_index = 0;
  std::vector<float> payload;

  bool operator==(const WireFrame&) const = default;
};

enum class FrameFault { magic, version, crc, truncated, length };

const char* fault_name(FrameFault f);

class FrameError : public FormatError {
 public:
  FrameError(FrameFault fault, const std::string& msg) : FormatError(msg), fault_(fault) {}
  FrameFault fault() const { return fault_; }

 private:
  FrameFault fault_;
};

// Total bytes of a frame carrying m floats.
constexpr std::size_t frame_size(std::size_t m) { return kHeaderBytes + 4 * m + kCrcBytes; }

// Throws ConfigError when the payload does not fit the u16 length field.
std::vector<std::uint8_t> encode_frame(const WireFrame& frame);

// `bytes` must hold exactly one frame.
WireFrame decode_frame(std::span<const std::uint8_t> bytes);

// Reassembles frames from arbitrarily split reads.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete frame, or nullopt if more bytes are needed. A malformed
  // frame throws; the reader is then unusable.
  std::optional<WireFrame> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

}  // namespace rscnet::stream
