#include "rscnet/model/flops.hpp"

#include "rscnet/model/rscnet.hpp"

namespace rscnet::model {

std::uint64_t conv_flops(std::uint64_t kh, std::uint64_t kw, std::uint64_t c_in, std::uint64_t c_out,
                         std::uint64_t h_out, std::uint64_t w_out) {
  return 2 * kh * kw * c_in * c_out * h_out * w_out;
}

std::uint64_t linear_flops(std::uint64_t d_in, std::uint64_t d_out) { return 2 * d_in * d_out; }

std::uint64_t lstm_flops(std::uint64_t d_in, std::uint64_t hidden) {
  return 8 * hidden * (d_in + hidden) + 4 * hidden;
}

FlopsBreakdown flops_count(const ModelConfig& config) {
  config.validate();
  const std::uint64_t na = config.n_antennas, h = config.n_subcarriers, w = config.window_frames;
  const std::uint64_t we = config.encoder_width, c = config.decoder_width();
  const std::uint64_t m = config.compressed_dim(), n = config.hidden_dim();
  auto cv = [&](std::uint64_t kh, std::uint64_t kw, std::uint64_t in, std::uint64_t out) {
    return conv_flops(kh, kw, in, out, h, w);
  };

  FlopsBreakdown f;
  f.windows = config.window_count();

  f.encoder_conv = cv(5, 5, na, we);
  for (std::size_t i = 0; i < kEncoderDilations.size(); ++i) f.encoder_conv += cv(3, 3, we, we);
  f.encoder_conv += cv(3, 3, we, we) + cv(1, 1, 2 * we, we);
  f.encoder = f.encoder_conv + linear_flops(we * h * w, m);

  f.recurrent = lstm_flops(m, n);

  const std::uint64_t block = cv(3, 3, na, c) + cv(3, 1, c, c) + cv(1, 3, c, c) + cv(3, 3, c, na)  // wide
                              + cv(1, 3, na, c) + cv(5, 1, c, c) + cv(1, 5, c, c) + cv(3, 1, c, na)  // narrow
                              + cv(1, 1, 2 * na, na);
  f.decoder = linear_flops(n, na * h * w) + cv(5, 5, na, na) + 2 * block;

  std::uint64_t in = config.embedding_dim();
  for (auto width : config.classifier_hidden) {
    f.classifier += linear_flops(in, width);
    in = width;
  }
  f.classifier += linear_flops(in, config.n_classes);
  return f;
}

}  // namespace rscnet::model
