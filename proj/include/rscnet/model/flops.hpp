#pragma once

#include <cstdint>

#include "rscnet/model/config.hpp"

namespace rscnet::model {

// Analytic operation counts, one multiply-add = 2 FLOPs.
//   conv   = 2 * k_h * k_w * C_in * C_out * H_out * W_out
//   linear = 2 * D_in * D_out
//   lstm   = 8 * N_h * (D_in + N_h) for the gate products, plus 4 * N_h for
//            the cell update (f*c + i*g) and the output product (o*tanh(c)).
// Bias adds, normalization, activations and residual adds are not counted.
std::uint64_t conv_flops(std::uint64_t kh, std::uint64_t kw, std::uint64_t c_in, std::uint64_t c_out,
                         std::uint64_t h_out, std::uint64_t w_out);
std::uint64_t linear_flops(std::uint64_t d_in, std::uint64_t d_out);
std::uint64_t lstm_flops(std::uint64_t d_in, std::uint64_t hidden);

struct FlopsBreakdown {
  std::uint64_t encoder_conv = 0;  // per window, convolutions only
  std::uint64_t encoder = 0;       // per window, convolutions + compression FC
  std::uint64_t recurrent = 0;     // per window (one LSTM step)
  std::uint64_t decoder = 0;       // per window
  std::uint64_t classifier = 0;    // per sample (runs once on the stacked embedding)
  std::uint64_t windows = 0;       // windows per sample

  std::uint64_t per_sample() const { return windows * (encoder + recurrent + decoder) + classifier; }
};

FlopsBreakdown flops_count(const ModelConfig& config);

}  // namespace rscnet::model
