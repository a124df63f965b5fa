#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "rscnet/numerics/ops.hpp"

namespace rscnet::model {

template <typename T>
struct ParamVisitor {
  std::function<void(const std::string&, Tensor<T>&)> param;
  std::function<void(const std::string&, Array<T>&)> buffer;
};

// Draws in double and narrows, so float and double models built from the same
// seed agree to float rounding.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  template <typename T>
  Array<T> uniform(Shape shape, double bound) {
    Array<T> a(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : a.storage()) v = static_cast<T>(dist(rng_));
    return a;
  }

 private:
  std::mt19937_64 rng_;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ops::ConvSpec spec, bool with_bias, Initializer& init);

  Tensor<T> forward(const Tensor<T>& x) const { return ops::conv2d(x, spec_, weight, bias); }
  void visit(const std::string& prefix, const ParamVisitor<T>& v);
  const ops::ConvSpec& spec() const { return spec_; }

  Tensor<T> weight;
  Tensor<T> bias;  // undefined when the conv feeds a normalization

 private:
  ops::ConvSpec spec_;
};

// conv (no bias) -> batch norm -> PReLU
template <typename T>
class ConvBnAct {
 public:
  ConvBnAct() = default;
  ConvBnAct(ops::ConvSpec spec, Initializer& init);

  // Training mode updates the running statistics; the model has a single
  // writer while training, and eval mode reads them only.
  Tensor<T> forward(const Tensor<T>& x, bool training) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& v);
  const ops::ConvSpec& spec() const { return conv.spec(); }

  Conv2d<T> conv;
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> slope;
  mutable ops::BatchNormState<T> norm;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Initializer& init);

  Tensor<T> forward(const Tensor<T>& x) const { return ops::linear(x, weight, bias); }
  void visit(const std::string& prefix, const ParamVisitor<T>& v);
  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  Tensor<T> weight;
  Tensor<T> bias;
};

}  // namespace rscnet::model
