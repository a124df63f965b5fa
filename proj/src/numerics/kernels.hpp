#pragma once

#include <array>
#include <cstddef>
#include <experimental/simd>

// Inner loops shared by the ops.
//
// Reductions (dot, sum) split into a fixed number of lanes, so the summation
// order is a property of the source rather than of the target's vector width
// or pointer alignment. Tile kernels give every output element its own lane
// and accumulate taps sequentially, which is likewise width-independent.
namespace rscnet::kernels {

namespace stdx = std::experimental;

inline constexpr std::size_t kLanes = 32;

template <typename T>
using Lanes = stdx::fixed_size_simd<T, kLanes>;

template <typename T>
inline T horizontal(const Lanes<T>& v) {
  std::array<T, kLanes> a;
  v.copy_to(a.data(), stdx::element_aligned);
  for (std::size_t width = kLanes / 2; width > 0; width /= 2) {
    for (std::size_t l = 0; l < width; ++l) a[l] += a[l + width];
  }
  return a[0];
}

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  Lanes<T> acc = 0;
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    acc += Lanes<T>(a + k, stdx::element_aligned) * Lanes<T>(b + k, stdx::element_aligned);
  }
  T tail = 0;
  for (; k < n; ++k) tail += a[k] * b[k];
  return horizontal(acc) + tail;
}

template <typename T>
inline T sum(const T* a, std::size_t n) {
  Lanes<T> acc = 0;
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) acc += Lanes<T>(a + k, stdx::element_aligned);
  T tail = 0;
  for (; k < n; ++k) tail += a[k];
  return horizontal(acc) + tail;
}

// y += alpha * x
template <typename T>
inline void axpy(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

// Register tile of consecutive outputs: acc[l] += w * src[l] for l < size().
template <typename T>
struct Tile {
  using V = stdx::native_simd<T>;
  static constexpr std::size_t kVectors = 4;
  static constexpr std::size_t size() { return kVectors * V::size(); }

  V acc[kVectors] = {V(0), V(0), V(0), V(0)};

  void fma(T w, const T* src) {
    const V wv(w);
    for (std::size_t v = 0; v < kVectors; ++v) acc[v] += wv * V(src + v * V::size(), stdx::element_aligned);
  }
  void store(T* dst) const {
    for (std::size_t v = 0; v < kVectors; ++v) acc[v].copy_to(dst + v * V::size(), stdx::element_aligned);
  }
};

}  // namespace rscnet::kernels
