#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rscnet/numerics/tensor.hpp"

// Differentiable operations over Tensor<T>. Every op is instantiated for
// float (training) and double (gradient checks).
//
// Image-like tensors are laid out [batch, channel, height, width]; in the
// model height is the subcarrier axis and width the frame (time) axis.
namespace rscnet::ops {

// Receptive span of a k-tap kernel dilated by d: k + (k-1)(d-1).
constexpr std::size_t effective_kernel_size(std::size_t k, std::size_t d) { return k + (k - 1) * (d - 1); }

struct ConvSpec {
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t dilation = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  std::size_t effective_h() const { return effective_kernel_size(kernel_h, dilation); }
  std::size_t effective_w() const { return effective_kernel_size(kernel_w, dilation); }
  // "same" zero padding: leading pad is floor((k'-1)/2), the rest trails.
  std::size_t pad_top() const { return (effective_h() - 1) / 2; }
  std::size_t pad_left() const { return (effective_w() - 1) / 2; }
  Shape weight_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }
};

// Dilated 2-D convolution with "same" zero padding:
//   out[b,o,i,j] = bias[o] + sum_c sum_m sum_n in[b,c,i+d*m-pad_h,j+d*n-pad_w] * w[o,c,m,n]
// `input` is [B,C_in,H,W] (or [C_in,H,W]); `bias` may be undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvSpec& spec, const Tensor<T>& weights, const Tensor<T>& bias);

// Affine map over the last axis. x: [..., D_in], w: [D_out, D_in], b: [D_out] or undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct BatchNormState {
  Array<T> running_mean;
  Array<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BatchNormState(std::size_t channels = 1)
      : running_mean(Shape{channels}, T(0)), running_var(Shape{channels}, T(1)) {}
};

// Per-channel normalization over (batch, height, width). In training mode the
// batch statistics are used and the running estimates updated; otherwise the
// running estimates are used.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                     bool training);

// Channel-wise leaky rectifier with learned negative slope (channel axis 1).
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);

// [B, ..., S*N_f] -> [B*S, ..., N_f]; window s of sample b lands at row b*S+s.
template <typename T>
Tensor<T> split_windows(const Tensor<T>& x, std::size_t frames_per_window);
// Inverse of split_windows.
template <typename T>
Tensor<T> merge_windows(const Tensor<T>& windows, std::size_t windows_per_sample);

// Softmax over the last axis, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

// Mean over the batch of -log softmax(logits)[label]. logits: [B,C] or [C].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

// Element-mean squared difference. Shapes must match exactly.
template <typename T>
Tensor<T> mse(const Tensor<T>& prediction, const Tensor<T>& target);

// Gate blocks stacked in order (input, forget, cell, output):
// weights [4N, D_in + N] act on concat(x, h); bias [4N].
template <typename T>
struct LstmParams {
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
};

// x: [B,D_in] (or [D_in]); state tensors [B,N] (or [N]).
template <typename T>
LstmState<T> lstm_cell(const Tensor<T>& x, const LstmState<T>& state, const LstmParams<T>& params);

}  // namespace rscnet::ops
