#include "rscnet/model/rscnet.hpp"

#include <cmath>

namespace rscnet::model {

namespace {

ops::ConvSpec conv(std::size_t kh, std::size_t kw, std::size_t d, std::size_t in, std::size_t out) {
  return ops::ConvSpec{kh, kw, d, in, out};
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
DConvBlock<T>::DConvBlock(std::size_t width, Initializer& init) {
  for (std::size_t i = 0; i < dilated.size(); ++i) dilated[i] = ConvBnAct<T>(conv(3, 3, kEncoderDilations[i], width, width), init);
  plain = ConvBnAct<T>(conv(3, 3, 1, width, width), init);
  fuse = Conv2d<T>(conv(1, 1, 1, 2 * width, width), true, init);
}

template <typename T>
Tensor<T> DConvBlock<T>::forward(const Tensor<T>& x, bool training) const {
  Tensor<T> a = x;
  for (const auto& layer : dilated) a = layer.forward(a, training);
  Tensor<T> b = plain.forward(x, training);
  return ops::add(x, fuse.forward(ops::concat<T>({a, b}, 1)));
}

template <typename T>
void DConvBlock<T>::visit(const std::string& prefix, const ParamVisitor<T>& v) {
  for (std::size_t i = 0; i < dilated.size(); ++i) dilated[i].visit(fmt::format("{}.dilated{}", prefix, i), v);
  plain.visit(prefix + ".plain", v);
  fuse.visit(prefix + ".fuse", v);
}

template <typename T>
DecoderBlock<T>::DecoderBlock(std::size_t channels, std::size_t width, Initializer& init) {
  const std::size_t a = channels, c = width;
  wide = {ConvBnAct<T>(conv(3, 3, 2, a, c), init), ConvBnAct<T>(conv(3, 1, 3, c, c), init),
          ConvBnAct<T>(conv(1, 3, 3, c, c), init), ConvBnAct<T>(conv(3, 3, 1, c, a), init)};
  narrow = {ConvBnAct<T>(conv(1, 3, 1, a, c), init), ConvBnAct<T>(conv(5, 1, 1, c, c), init),
            ConvBnAct<T>(conv(1, 5, 1, c, c), init), ConvBnAct<T>(conv(3, 1, 1, c, a), init)};
  fuse = Conv2d<T>(conv(1, 1, 1, 2 * a, a), true, init);
}

template <typename T>
Tensor<T> DecoderBlock<T>::forward(const Tensor<T>& x, bool training) const {
  Tensor<T> a = x, b = x;
  for (const auto& layer : wide) a = layer.forward(a, training);
  for (const auto& layer : narrow) b = layer.forward(b, training);
  return ops::add(x, fuse.forward(ops::concat<T>({a, b}, 1)));
}

template <typename T>
void DecoderBlock<T>::visit(const std::string& prefix, const ParamVisitor<T>& v) {
  for (std::size_t i = 0; i < wide.size(); ++i) wide[i].visit(fmt::format("{}.wide{}", prefix, i), v);
  for (std::size_t i = 0; i < narrow.size(); ++i) narrow[i].visit(fmt::format("{}.narrow{}", prefix, i), v);
  fuse.visit(prefix + ".fuse", v);
}

// ---------------------------------------------------------------------------

template <typename T>
RscnetModel<T>::RscnetModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Initializer init(seed);
  const auto& c = config_;
  const std::size_t na = c.n_antennas, w = c.encoder_width, m = c.compressed_dim(), n = c.hidden_dim();

  encoder_head = ConvBnAct<T>(conv(5, 5, 1, na, w), init);
  encoder_block = DConvBlock<T>(w, init);
  compress = Linear<T>(w * c.n_subcarriers * c.window_frames, m, init);

  const double bound = 1.0 / std::sqrt(static_cast<double>(n));
  lstm.weights = Tensor<T>::leaf(init.uniform<T>({4 * n, m + n}, bound), true);
  lstm.bias = Tensor<T>::leaf(init.uniform<T>({4 * n}, bound), true);

  restore = Linear<T>(n, c.window_size(), init);
  decoder_head = ConvBnAct<T>(conv(5, 5, 1, na, na), init);
  for (auto& block : decoder_blocks) block = DecoderBlock<T>(na, c.decoder_width(), init);

  std::size_t in = c.embedding_dim();
  for (auto width : c.classifier_hidden) {
    classifier.emplace_back(in, width, init);
    in = width;
  }
  classifier.emplace_back(in, c.n_classes, init);
}

template <typename T>
Tensor<T> RscnetModel<T>::encode(const Tensor<T>& windows, bool training) const {
  const auto& c = config_;
  const bool single = windows.rank() == 3;
  Tensor<T> x = single ? ops::reshape(windows, {1, windows.dim(0), windows.dim(1), windows.dim(2)}) : windows;
  check_shape(x.rank() == 4 && x.dim(1) == c.n_antennas && x.dim(2) == c.n_subcarriers && x.dim(3) == c.window_frames,
              fmt::format("encode: window shape {} does not match config {}x{}x{}", shape_str(windows.shape()),
                          c.n_antennas, c.n_subcarriers, c.window_frames));
  const std::size_t batch = x.dim(0);
  x = encoder_head.forward(x, training);
  x = encoder_block.forward(x, training);
  x = ops::reshape(x, {batch, c.encoder_width * c.n_subcarriers * c.window_frames});
  x = compress.forward(x);
  return single ? ops::reshape(x, {c.compressed_dim()}) : x;
}

template <typename T>
ops::LstmState<T> RscnetModel<T>::zero_state(std::size_t batch) const {
  const std::size_t n = config_.hidden_dim();
  return {Tensor<T>::constant(Array<T>({batch, n})), Tensor<T>::constant(Array<T>({batch, n}))};
}

template <typename T>
RecurrentOutput<T> RscnetModel<T>::recurrent(const Tensor<T>& seq, const ops::LstmState<T>* initial) const {
  check_shape(seq.rank() == 3 && seq.dim(2) == config_.compressed_dim() && seq.dim(1) >= 1,
              fmt::format("recurrent: sequence {} is not [B, S, {}]", shape_str(seq.shape()), config_.compressed_dim()));
  const std::size_t batch = seq.dim(0), steps = seq.dim(1), m = seq.dim(2), n = config_.hidden_dim();
  ops::LstmState<T> state = initial != nullptr ? *initial : zero_state(batch);
  check_shape(state.h.shape() == Shape({batch, n}) && state.c.shape() == Shape({batch, n}),
              fmt::format("recurrent: state must be [{}, {}]", batch, n));
  std::vector<Tensor<T>> hs;
  hs.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    auto x = ops::reshape(ops::slice(seq, 1, s, 1), {batch, m});
    state = ops::lstm_cell(x, state, lstm);
    hs.push_back(ops::reshape(state.h, {batch, 1, n}));
  }
  return {steps == 1 ? hs.front() : ops::concat(hs, 1), state};
}

template <typename T>
Tensor<T> RscnetModel<T>::decode(const Tensor<T>& h, bool training) const {
  const auto& c = config_;
  const bool single = h.rank() == 1;
  check_shape((h.rank() == 1 || h.rank() == 2) && h.shape().back() == c.hidden_dim(),
              fmt::format("decode: hidden {} does not end in {}", shape_str(h.shape()), c.hidden_dim()));
  const std::size_t batch = single ? 1 : h.dim(0);
  auto x = ops::reshape(restore.forward(h), {batch, c.n_antennas, c.n_subcarriers, c.window_frames});
  x = ops::add(x, decoder_head.forward(x, training));
  for (const auto& block : decoder_blocks) x = block.forward(x, training);
  return single ? ops::reshape(x, {c.n_antennas, c.n_subcarriers, c.window_frames}) : x;
}

template <typename T>
ClassifierOutput<T> RscnetModel<T>::classify(const Tensor<T>& stacked) const {
  check_shape(stacked.shape().back() == config_.embedding_dim(),
              fmt::format("classify: embedding {} does not end in {}", shape_str(stacked.shape()),
                          config_.embedding_dim()));
  Tensor<T> x = stacked;
  for (std::size_t i = 0; i + 1 < classifier.size(); ++i) x = ops::relu(classifier[i].forward(x));
  return {classifier.back().forward(x), x};
}

template <typename T>
ForwardResult<T> RscnetModel<T>::forward(const Tensor<T>& samples, bool training) const {
  const auto& c = config_;
  Tensor<T> x = samples.rank() == 3 ? ops::reshape(samples, {1, samples.dim(0), samples.dim(1), samples.dim(2)}) : samples;
  check_shape(x.rank() == 4 && x.dim(1) == c.n_antennas && x.dim(2) == c.n_subcarriers && x.dim(3) == c.n_timesteps,
              fmt::format("forward: sample shape {} does not match config {}x{}x{}", shape_str(samples.shape()),
                          c.n_antennas, c.n_subcarriers, c.n_timesteps));
  const std::size_t batch = x.dim(0), s = c.window_count(), m = c.compressed_dim(), n = c.hidden_dim();

  auto codes = encode(ops::split_windows(x, c.window_frames), training);
  auto seq = ops::reshape(codes, {batch, s, m});
  auto rec = recurrent(seq);
  auto windows = decode(ops::reshape(rec.hidden, {batch * s, n}), training);
  auto cls = classify(ops::reshape(rec.hidden, {batch, s * n}));
  return {ops::merge_windows(windows, s), cls.logits, seq, rec.hidden, cls.penultimate, rec.final_state};
}

// ---------------------------------------------------------------------------

template <typename T>
void RscnetModel<T>::visit(const ParamVisitor<T>& v) {
  encoder_head.visit("encoder.head", v);
  encoder_block.visit("encoder.block", v);
  compress.visit("encoder.compress", v);
  v.param("recurrent.lstm.weight", lstm.weights);
  v.param("recurrent.lstm.bias", lstm.bias);
  restore.visit("decoder.restore", v);
  decoder_head.visit("decoder.head", v);
  for (std::size_t i = 0; i < decoder_blocks.size(); ++i) decoder_blocks[i].visit(fmt::format("decoder.block{}", i), v);
  for (std::size_t i = 0; i < classifier.size(); ++i) classifier[i].visit(fmt::format("classifier.fc{}", i), v);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> RscnetModel<T>::named_parameters() {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  visit({[&](const std::string& name, Tensor<T>& t) { out.emplace_back(name, t); },
         [](const std::string&, Array<T>&) {}});
  return out;
}

template <typename T>
std::vector<Tensor<T>> RscnetModel<T>::parameters() {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Array<T>*>> RscnetModel<T>::named_buffers() {
  std::vector<std::pair<std::string, Array<T>*>> out;
  visit({[](const std::string&, Tensor<T>&) {},
         [&](const std::string& name, Array<T>& a) { out.emplace_back(name, &a); }});
  return out;
}

template <typename T>
std::size_t RscnetModel<T>::param_count() {
  std::size_t total = 0;
  for (auto& [name, t] : named_parameters()) total += t.numel();
  return total;
}

template <typename T>
std::vector<std::pair<std::string, Array<float>>> RscnetModel<T>::state_dict() {
  std::vector<std::pair<std::string, Array<float>>> out;
  for (auto& [name, t] : named_parameters()) out.emplace_back(name, t.value().template cast<float>());
  for (auto& [name, a] : named_buffers()) out.emplace_back(name, a->template cast<float>());
  return out;
}

template <typename T>
void RscnetModel<T>::load_state_dict(const std::map<std::string, Array<float>>& blobs) {
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Array<float>& {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw FormatError(fmt::format("checkpoint is missing '{}'", name));
    if (it->second.shape() != shape) {
      throw FormatError(fmt::format("checkpoint '{}' has shape {}, model expects {}", name,
                                    shape_str(it->second.shape()), shape_str(shape)));
    }
    return it->second;
  };
  for (auto& [name, t] : named_parameters()) t.mutable_value() = fetch(name, t.shape()).template cast<T>();
  for (auto& [name, a] : named_buffers()) *a = fetch(name, a->shape()).template cast<T>();
}

template class DConvBlock<float>;
template class DConvBlock<double>;
template class DecoderBlock<float>;
template class DecoderBlock<double>;
template class RscnetModel<float>;
template class RscnetModel<double>;

}  // namespace rscnet::model
