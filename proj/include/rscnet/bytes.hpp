#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "rscnet/error.hpp"

// Explicit-endianness byte packing for the checkpoint, dataset and wire formats.
namespace rscnet::bytes {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
void put_be(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = sizeof(U); i-- > 0;) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return v;
}

template <typename U>
U get_be(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v = static_cast<U>((v << 8) | p[i]);
  return v;
}

inline void put_f32_le(std::vector<std::uint8_t>& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f)); }
inline float get_f32_le(const std::uint8_t* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }
inline void put_f64_le(std::vector<std::uint8_t>& out, double f) { put_le(out, std::bit_cast<std::uint64_t>(f)); }
inline double get_f64_le(const std::uint8_t* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }

// Bounds-checked sequential reader over a byte buffer.
class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  const std::uint8_t* take(std::size_t n) {
    if (size_ - pos_ < n) {
      throw FormatError("unexpected end of data: need " + std::to_string(n) + " bytes at offset " +
                        std::to_string(pos_) + " of " + std::to_string(size_));
    }
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  template <typename U>
  U le() {
    return get_le<U>(take(sizeof(U)));
  }
  float f32() { return get_f32_le(take(4)); }
  double f64() { return get_f64_le(take(8)); }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace rscnet::bytes
