#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "rscnet/error.hpp"

namespace rscnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, "x")); }

// Dense row-major real array. Plain value type; no gradient bookkeeping.
template <typename T>
class Array {
 public:
  using value_type = T;

  Array() = default;

  explicit Array(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    check_extents();
  }

  Array(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    check_extents();
    check_shape(data_.size() == shape_numel(shape_),
                fmt::format("array of shape {} needs {} values, got {}", shape_str(shape_), shape_numel(shape_),
                            data_.size()));
  }

  static Array zeros(Shape shape) { return Array(std::move(shape)); }
  static Array full(Shape shape, T v) { return Array(std::move(shape), v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Same values, new shape with equal element count.
  Array reshaped(Shape shape) const {
    check_shape(shape_numel(shape) == data_.size(),
                fmt::format("cannot reshape {} into {}", shape_str(shape_), shape_str(shape)));
    return Array(std::move(shape), data_);
  }

  template <typename U>
  Array<U> cast() const {
    return Array<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Array& other) const = default;

 private:
  void check_extents() const {
    for (auto e : shape_) check_shape(e > 0, fmt::format("shape {} has a zero extent", shape_str(shape_)));
  }

  Shape shape_;
  std::vector<T> data_;
};

// x - x is NaN exactly when x is infinite or NaN; the OR-reduction over
// integer flags vectorizes where std::isfinite does not.
template <typename T>
bool all_finite(std::span<const T> values) {
  unsigned bad = 0;
  for (T v : values) bad |= static_cast<unsigned>((v - v) != (v - v));
  return bad == 0;
}

}  // namespace rscnet
