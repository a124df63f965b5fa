#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rscnet/model/config.hpp"
#include "rscnet/model/layers.hpp"

namespace rscnet::model {

// Dilation rates of the three stacked 3x3 convolutions in the encoder block.
inline constexpr std::array<std::size_t, 3> kEncoderDilations{1, 2, 3};

// Residual block of the edge encoder: three dilated 3x3 convs in series, a
// plain 3x3 conv in parallel, channel concat, linear 1x1 fuse, skip add.
template <typename T>
class DConvBlock {
 public:
  DConvBlock() = default;
  DConvBlock(std::size_t width, Initializer& init);
  Tensor<T> forward(const Tensor<T>& x, bool training) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& v);

  std::array<ConvBnAct<T>, 3> dilated;
  ConvBnAct<T> plain;
  Conv2d<T> fuse;
};

// Residual decoder block with expansion width c = 3*rho.
//   wide:   3x3 d2 (N_a->c), 3x1 d3, 1x3 d3, 3x3 (c->N_a)
//   narrow: 1x3 (N_a->c), 5x1, 1x5, 3x1 (c->N_a)
template <typename T>
class DecoderBlock {
 public:
  DecoderBlock() = default;
  DecoderBlock(std::size_t channels, std::size_t width, Initializer& init);
  Tensor<T> forward(const Tensor<T>& x, bool training) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& v);

  std::array<ConvBnAct<T>, 4> wide;
  std::array<ConvBnAct<T>, 4> narrow;
  Conv2d<T> fuse;
};

template <typename T>
struct RecurrentOutput {
  Tensor<T> hidden;  // [B, S, N_h]
  ops::LstmState<T> final_state;
};

template <typename T>
struct ClassifierOutput {
  Tensor<T> logits;       // [B, C]
  Tensor<T> penultimate;  // activations feeding the last layer
};

template <typename T>
struct ForwardResult {
  Tensor<T> reconstruction;  // [B, N_a, N_s, N_t]
  Tensor<T> logits;          // [B, C]
  Tensor<T> compressed;      // [B, S, M]
  Tensor<T> hidden;          // [B, S, N_h]
  Tensor<T> penultimate;     // [B, last classifier hidden width]
  ops::LstmState<T> final_state;
};

template <typename T>
class RscnetModel {
 public:
  explicit RscnetModel(ModelConfig config, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }

  // Edge side. windows: [B', N_a, N_s, N_f] (or one unbatched window) -> [B', M]
  Tensor<T> encode(const Tensor<T>& windows, bool training = false) const;
  // Cloud side. seq: [B, S, M]; `initial` defaults to zeros.
  RecurrentOutput<T> recurrent(const Tensor<T>& seq, const ops::LstmState<T>* initial = nullptr) const;
  // h: [B', N_h] (or [N_h]) -> [B', N_a, N_s, N_f]
  Tensor<T> decode(const Tensor<T>& h, bool training = false) const;
  // stacked: [B, S*N_h] (or unbatched)
  ClassifierOutput<T> classify(const Tensor<T>& stacked) const;

  // samples: [B, N_a, N_s, N_t] or a single [N_a, N_s, N_t].
  ForwardResult<T> forward(const Tensor<T>& samples, bool training = false) const;

  ops::LstmState<T> zero_state(std::size_t batch) const;

  // Trainable tensors in a fixed order, with dotted names.
  std::vector<std::pair<std::string, Tensor<T>>> named_parameters();
  std::vector<Tensor<T>> parameters();
  // Non-trainable state (normalization running statistics).
  std::vector<std::pair<std::string, Array<T>*>> named_buffers();

  std::size_t param_count();

  // Parameters and buffers as float32 blobs, keyed by name.
  std::vector<std::pair<std::string, Array<float>>> state_dict();
  // Requires every parameter and buffer name with a matching shape; ignores
  // blobs with other names.
  void load_state_dict(const std::map<std::string, Array<float>>& blobs);

  Linear<T> compress;  // encoder FC
  ConvBnAct<T> encoder_head;
  DConvBlock<T> encoder_block;
  ops::LstmParams<T> lstm;
  Linear<T> restore;  // decoder FC
  ConvBnAct<T> decoder_head;
  std::array<DecoderBlock<T>, 2> decoder_blocks;
  std::vector<Linear<T>> classifier;

 private:
  void visit(const ParamVisitor<T>& v);

  ModelConfig config_;
};

}  // namespace rscnet::model
