#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rscnet/numerics/tensor.hpp"

namespace rscnet {

template <typename T>
struct OptimizerState {
  T learning_rate = T(0.01);
  T momentum = T(0.9);
  T weight_decay = T(0);
  std::vector<Array<T>> velocity;  // one per parameter, same shape
  std::vector<Array<T>> second;    // squared-gradient averages; Adam only
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
  std::size_t step_index = 0;
  std::size_t total_steps = 0;

  // Zero buffers mirroring `params`; `adaptive` also allocates `second`.
  void reset(std::span<const Tensor<T>> params, bool adaptive = false);
};

// Classic momentum SGD with L2 decay folded into the gradient:
//   v <- mu * v + (g + wd * w);  w <- w - lr * v
// Uses each parameter's current grad (missing grad counts as zero). Checks all
// gradients for finiteness before touching anything.
template <typename T>
void sgd_step(OptimizerState<T>& state, std::span<Tensor<T>> params);

// Adam with momentum as beta1 and L2 decay folded into the gradient:
//   g' = g + wd * w;  v <- mu * v + (1 - mu) * g';  s <- beta2 * s + (1 - beta2) * g'^2
//   w <- w - lr * v_hat / (sqrt(s_hat) + eps), with bias correction at step t = step_index + 1
template <typename T>
void adam_step(OptimizerState<T>& state, std::span<Tensor<T>> params);

// 0.5 * lr0 * (1 + cos(pi * step / total)), clamped at 0.
double cosine_lr(std::size_t step, std::size_t total, double lr0);

}  // namespace rscnet
