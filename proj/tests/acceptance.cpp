// Acceptance checks. Prints one PASS/FAIL line per criterion and exits with the
// number of failures. Criterion numbers given as arguments select a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rscnet/data/synthetic.hpp"
#include "rscnet/eval/metrics.hpp"
#include "rscnet/model/flops.hpp"
#include "rscnet/stream/runtime.hpp"
#include "rscnet/train/train.hpp"
#include "support/oracles.hpp"

namespace rscnet {
namespace {

using rscnet::testing::random_array;
using TensorD = Tensor<double>;

// --- tolerances -------------------------------------------------------------------

constexpr double kGradTol = 1e-4;
constexpr double kConvTol = 1e-12;
constexpr int kConvCases = 1200;
constexpr double kAccuracyFloor = 0.90;
constexpr double kNmseCeilingDb = -10.0;
constexpr double kTrainBudgetS = 30.0 * 60.0;
constexpr std::size_t kMaxEpochs = 100;
constexpr double kStreamTol = 1e-6;
constexpr double kStreamBudgetS = 60.0;
constexpr double kGradBudgetS = 60.0;
constexpr double kOverheadSlack = 1.3;

// Synthetic training run for criterion 5.
train::TrainConfig synthetic_run() {
  train::TrainConfig c;
  c.optimizer = train::Optimizer::adam;
  c.learning_rate = 1e-3;
  c.batch_size = 16;
  c.epochs = 40;
  c.loss_weight = 50.0;
  c.seed = 0;
  return c;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TensorD leaf(Array<double> a) { return TensorD::leaf(std::move(a), true); }

// --- 1 ------------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::string worst_name;
  auto check = [&](const std::string& name, const std::function<TensorD()>& fn, std::vector<TensorD> inputs) {
    const double e = rscnet::testing::grad_check(fn, std::move(inputs)).max_rel_error;
    if (!(e <= worst)) worst = e, worst_name = name;
  };
  using rscnet::testing::project;

  const std::pair<std::size_t, std::size_t> kernels[] = {{3, 1}, {1, 3}, {5, 1}, {1, 5}, {3, 3}, {5, 5}};
  for (std::size_t d = 1; d <= 3; ++d) {
    for (auto [kh, kw] : kernels) {
      ops::ConvSpec spec{kh, kw, d, 2, 3};
      auto x = leaf(random_array({2, 2, 5, 6}, rng));
      auto w = leaf(random_array(spec.weight_shape(), rng));
      auto b = leaf(random_array({3}, rng));
      check(fmt::format("conv2d {}x{} d={}", kh, kw, d), [&] { return project(ops::conv2d(x, spec, w, b)); },
            {x, w, b});
    }
  }
  auto x = leaf(random_array({3, 7}, rng));
  auto w = leaf(random_array({4, 7}, rng));
  auto b = leaf(random_array({4}, rng));
  check("linear", [&] { return project(ops::linear(x, w, b)); }, {x, w, b});

  auto img = leaf(random_array({3, 2, 4, 5}, rng));
  auto gamma = leaf(random_array({2}, rng, 0.5, 1.5));
  auto beta = leaf(random_array({2}, rng));
  for (bool training : {true, false}) {
    ops::BatchNormState<double> state(2);
    state.running_var.fill(1.7);
    check(training ? "batch_norm train" : "batch_norm eval",
          [&] { return project(ops::batch_norm(img, gamma, beta, state, training)); }, {img, gamma, beta});
  }
  // Away from the kink at 0.
  auto a = random_array({3, 2, 4, 5}, rng, 0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : a.values()) v = flip(rng) ? -v : v;
  auto xp = leaf(a);
  auto slope = leaf(random_array({2}, rng, 0.1, 0.4));
  check("prelu", [&] { return project(ops::prelu(xp, slope)); }, {xp, slope});
  check("relu", [&] { return project(ops::relu(xp)); }, {xp});

  auto p = leaf(random_array({3, 4}, rng));
  auto q = leaf(random_array({3, 4}, rng));
  const std::vector<std::pair<const char*, std::function<TensorD()>>> elementwise = {
      {"sigmoid", [&] { return project(ops::sigmoid(p)); }},
      {"tanh", [&] { return project(ops::tanh(p)); }},
      {"add", [&] { return project(ops::add(p, q)); }},
      {"sub", [&] { return project(ops::sub(p, q)); }},
      {"mul", [&] { return project(ops::mul(p, q)); }},
      {"scale", [&] { return project(ops::scale(p, -2.5)); }},
      {"sum", [&] { return ops::sum(ops::mul(p, q)); }},
      {"mean", [&] { return ops::mean(ops::mul(p, q)); }},
      {"reshape", [&] { return project(ops::reshape(p, {2, 6})); }},
      {"concat", [&] { return project(ops::concat<double>({p, q, p}, 1)); }},
      {"slice", [&] { return project(ops::slice(p, 1, 1, 2)); }},
      {"softmax", [&] { return project(ops::softmax(p)); }},
      {"mse", [&] { return ops::mse(p, q); }},
  };
  for (const auto& [name, fn] : elementwise) check(name, fn, {p, q});
  const int labels[] = {2, 0, 3};
  check("cross_entropy", [&] { return ops::cross_entropy(p, std::span<const int>(labels)); }, {p});

  auto series = leaf(random_array({2, 3, 4, 12}, rng));
  check("split_windows", [&] { return project(ops::split_windows(series, 4)); }, {series});
  auto windows = leaf(random_array({6, 3, 4, 4}, rng));
  check("merge_windows", [&] { return project(ops::merge_windows(windows, 3)); }, {windows});

  const std::size_t n = 3, dim = 4;
  auto in = leaf(random_array({2, dim}, rng));
  auto h = leaf(random_array({2, n}, rng));
  auto c = leaf(random_array({2, n}, rng));
  auto wt = leaf(random_array({4 * n, dim + n}, rng));
  auto bt = leaf(random_array({4 * n}, rng));
  check(
      "lstm_cell",
      [&] {
        auto s = ops::lstm_cell(in, {h, c}, {wt, bt});
        auto s2 = ops::lstm_cell(in, s, {wt, bt});
        return ops::add(project(s2.h, 1), project(s2.c, 2));
      },
      {in, h, c, wt, bt});

  // Whole model: N_f=5, W=2, M=3, N_h=3, C=3 on a 2x4x10 sample.
  model::ModelConfig tiny;
  tiny.n_antennas = 2;
  tiny.n_subcarriers = 4;
  tiny.n_timesteps = 10;
  tiny.window_frames = 5;
  tiny.compression_ratio = 3.0 / 40.0;
  tiny.encoder_width = 2;
  tiny.n_classes = 3;
  tiny.classifier_hidden = {6, 4};
  bool tiny_ok = tiny.compressed_dim() == 3 && tiny.hidden_dim() == 3;
  model::RscnetModel<double> net(tiny, 19);
  auto input = TensorD::constant(random_array({3, 2, 4, 10}, rng, 0, 1));
  const int tiny_labels[] = {0, 2, 1};
  check(
      "tiny model",
      [&] {
        auto out = net.forward(input, true);
        return ops::add(ops::cross_entropy(out.logits, std::span<const int>(tiny_labels)),
                        ops::scale(ops::mse(out.reconstruction, input), 50.0));
      },
      net.parameters());

  const double elapsed = seconds_since(t0);
  return {tiny_ok && worst < kGradTol && elapsed < kGradBudgetS,
          fmt::format("worst rel err {:.2e} ({}), {:.1f} s", worst, worst_name, elapsed)};
}

// --- 2 ------------------------------------------------------------------------------

Outcome conv_oracle() {
  std::mt19937_64 rng(202);
  const std::pair<std::size_t, std::size_t> kernels[] = {{3, 1}, {1, 3}, {5, 1}, {1, 5}, {3, 3}, {5, 5}};
  std::uniform_int_distribution<std::size_t> extent(1, 9), channels(1, 4);
  double worst = 0.0;
  std::set<std::pair<std::size_t, std::size_t>> covered;
  for (int n = 0; n < kConvCases; ++n) {
    const auto [kh, kw] = kernels[n % 6];
    const std::size_t d = 1 + (n / 6) % 3;
    covered.insert({n % 6, d});
    ops::ConvSpec spec{kh, kw, d, channels(rng), channels(rng)};
    auto x = random_array({spec.in_channels, extent(rng), extent(rng)}, rng);
    auto w = random_array(spec.weight_shape(), rng);
    auto b = random_array({spec.out_channels}, rng);
    auto y = ops::conv2d(TensorD::constant(x), spec, TensorD::constant(w), TensorD::constant(b)).value();
    auto ref = rscnet::testing::conv2d_reference(x, w, b.storage(), d);
    if (y.shape() != ref.shape()) return {false, fmt::format("case {}: shape mismatch", n)};
    for (std::size_t i = 0; i < y.size(); ++i)
      worst = std::max(worst, std::abs(y[i] - ref[i]) / std::max(1.0, std::abs(ref[i])));
  }
  return {worst <= kConvTol && covered.size() == 18,
          fmt::format("{} cases, 6 kernels x 3 dilations, worst rel diff {:.1e}", kConvCases, worst)};
}

// --- 3 ------------------------------------------------------------------------------

Outcome compression_arithmetic() {
  model::ModelConfig a, b;
  a.window_frames = b.window_frames = 50;
  a.compression_ratio = 1.0 / 90.0;
  b.compression_ratio = 1.0 / 4500.0;
  return {a.compressed_dim() == 50 && b.compressed_dim() == 1,
          fmt::format("M(50, 1/90) = {}, M(50, 1/4500) = {}", a.compressed_dim(), b.compressed_dim())};
}

// --- 4 ------------------------------------------------------------------------------

Outcome windowing_bijection() {
  std::mt19937_64 rng(404);
  const auto h = random_array({3, 30, 250}, rng).cast<float>();
  std::string failures;
  for (std::size_t nf : {5u, 10u, 25u, 50u, 125u, 250u}) {
    const auto windows = data::segment_windows(h, nf);
    bool ok = windows.size() == 250 / nf && data::merge_windows(windows) == h;
    // Window s holds frames [s*N_f, (s+1)*N_f).
    for (std::size_t s = 0; ok && s < windows.size(); ++s)
      for (std::size_t r = 0; r < 90; ++r)
        for (std::size_t t = 0; t < nf; ++t) ok = ok && windows[s][r * nf + t] == h[r * 250 + s * nf + t];
    if (!ok) failures += fmt::format(" N_f={}", nf);
  }
  return {failures.empty(), failures.empty() ? "N_f in {5,10,25,50,125,250} round-trip exactly" : "failed:" + failures};
}

// --- 5 ------------------------------------------------------------------------------

Outcome synthetic_training() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto split = data::normalize(data::generate_synthetic({}, {700, 100, 100}));
  model::ModelConfig mc;
  mc.window_frames = 50;
  mc.compression_ratio = 1.0 / 90.0;
  mc.expansion_rate = 1;
  const auto tc = synthetic_run();
  mc.loss_weight = tc.loss_weight;
  model::RscnetModel<float> net(mc, tc.seed);
  train::TrainOptions options;
  options.on_epoch = [](const train::EpochStats& e) {
    std::fprintf(stderr, "  epoch %3zu  loss %.4f  val acc %.3f  val nmse %.2f dB  %.0f s\n", e.epoch, e.train_loss,
                 e.val_accuracy, e.val_nmse_db, e.wall_time_s);
  };
  auto result = train::train(net, split, tc, options);
  net.load_state_dict(std::map<std::string, Array<float>>(result.best_state.begin(), result.best_state.end()));
  const auto ev = eval::evaluate(net, split.test, &split.stats);
  const double elapsed = seconds_since(t0);
  return {tc.epochs <= kMaxEpochs && ev.accuracy >= kAccuracyFloor && ev.nmse_db <= kNmseCeilingDb &&
              elapsed < kTrainBudgetS,
          fmt::format("test accuracy {:.3f}, test NMSE {:.2f} dB ({:.2f} dB raw), {} epochs, {:.0f} s", ev.accuracy,
                      ev.nmse_db, ev.nmse_db_raw, tc.epochs, elapsed)};
}

// --- 6 ------------------------------------------------------------------------------

// Written out term by term, independent of the library's helpers.
std::uint64_t closed_form_flops(std::uint64_t nf, std::uint64_t rho) {
  const std::uint64_t na = 3, ns = 30, w = 8, s = 250 / nf, hw = ns * nf;
  const std::uint64_t m = 3 * ns * nf / 90, nh = m, c = 3 * rho;
  const std::uint64_t enc = 2 * hw * (25 * na * w + 4 * 9 * w * w + 2 * w * w) + 2 * w * hw * m;
  const std::uint64_t rec = 8 * nh * (m + nh) + 4 * nh;
  const std::uint64_t block = 9 * na * c + 3 * c * c + 3 * c * c + 9 * c * na  // wide branch
                              + 3 * na * c + 5 * c * c + 5 * c * c + 3 * c * na  // narrow branch
                              + 2 * na * na;                                    // 1x1 fuse
  const std::uint64_t dec = 2 * nh * na * hw + 2 * hw * (25 * na * na + 2 * block);
  const std::uint64_t cls = 2 * (s * nh * 512 + 512 * 128 + 128 * 7);
  return s * (enc + rec + dec) + cls;
}

Outcome flops_counter() {
  auto cfg = [](std::size_t nf, std::size_t rho) {
    model::ModelConfig c;
    c.window_frames = nf;
    c.expansion_rate = rho;
    return c;
  };
  std::string detail;
  bool ok = true;
  for (auto [nf, rho] : {std::pair<std::size_t, std::size_t>{50, 1}, {5, 1}, {50, 5}}) {
    const auto got = model::flops_count(cfg(nf, rho)).per_sample();
    const auto want = closed_form_flops(nf, rho);
    ok = ok && got == want;
    detail += fmt::format("N_f={} rho={}: {}{}; ", nf, rho, got, got == want ? "" : fmt::format(" != {}", want));
  }
  // With N_h = M the embedding S*M is 250 for every N_f; the trend needs a
  // fixed hidden width.
  std::uint64_t previous = UINT64_MAX;
  for (std::size_t nf : {5u, 10u, 25u, 50u, 125u, 250u}) {
    auto fixed = cfg(nf, 1);
    fixed.lstm_hidden = 50;
    const auto cls = model::flops_count(fixed).classifier;
    ok = ok && cls < previous;
    previous = cls;
  }
  const double ratio =
      double(model::flops_count(cfg(50, 5)).decoder) / double(model::flops_count(cfg(50, 1)).decoder);
  ok = ok && ratio >= 5.0 && ratio <= 15.0;
  return {ok, detail + fmt::format("classifier falls with N_f at N_h=50, decoder rho5/rho1 = {:.2f}", ratio)};
}

// --- 7 ------------------------------------------------------------------------------

Outcome streaming_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  model::ModelConfig cfg;
  model::RscnetModel<float> net(cfg, 707);
  std::mt19937_64 rng(708);
  for (auto& [name, buf] : net.named_buffers()) {
    std::uniform_real_distribution<float> u(0.5f, 1.5f);
    for (auto& v : buf->values()) v = name.ends_with("var") ? u(rng) : u(rng) - 1.0f;
  }
  std::vector<Array<float>> raw;
  std::vector<data::CsiSample> samples;
  for (int i = 0; i < 20; ++i) {
    raw.push_back(random_array({3, 30, 250}, rng, 0.2, 2.0).cast<float>());
    samples.push_back({raw.back(), 0});
  }
  const auto stats = data::compute_stats(samples);

  // Sessions 1 and 2 take ten samples each; their frames share one byte stream.
  std::vector<std::vector<std::vector<std::uint8_t>>> framed(2);
  for (int s = 0; s < 2; ++s) {
    auto pipe = std::make_shared<stream::Loopback>();
    stream::LoopbackSink sink(pipe);
    std::vector<Array<float>> mine(raw.begin() + 10 * s, raw.begin() + 10 * (s + 1));
    stream::edge_run(stream::sample_frames(mine), net, stats, sink, {std::uint32_t(s + 1), 0, 0});
    pipe->close();
    std::vector<std::uint8_t> bytes(pipe->size());
    pipe->read(bytes);
    for (std::size_t k = 0; k < bytes.size(); k += stream::frame_size(50))
      framed[s].emplace_back(bytes.begin() + long(k), bytes.begin() + long(k + stream::frame_size(50)));
  }
  auto wire = std::make_shared<stream::Loopback>();
  for (std::size_t k = 0; k < framed[0].size(); ++k)
    for (int s = 0; s < 2; ++s) wire->write(framed[s][k]);
  wire->close();

  std::vector<stream::Prediction> predictions;
  std::vector<stream::ReconstructedWindow> windows;
  stream::CloudOptions options;
  options.on_prediction = [&](const stream::Prediction& p) { predictions.push_back(p); };
  options.on_window = [&](const stream::ReconstructedWindow& w) { windows.push_back(w); };
  stream::Cloud cloud(net, options);
  stream::LoopbackSource source(wire);
  stream::cloud_run(source, cloud);

  std::vector<float> all;
  for (const auto& r : raw) {
    const auto z = data::normalize(r, stats);
    all.insert(all.end(), z.storage().begin(), z.storage().end());
  }
  const auto offline = net.forward(Tensor<float>::constant(Array<float>({20, 3, 30, 250}, all)));
  double worst = 0.0;
  for (const auto& p : predictions) {
    const std::size_t b = (p.session_id - 1) * 10 + p.sample_id;
    for (std::size_t k = 0; k < 7; ++k)
      worst = std::max(worst, std::abs(double(p.logits[k]) - offline.logits.value()[b * 7 + k]));
  }
  const auto& rec = offline.reconstruction.value();
  for (const auto& w : windows) {
    const std::size_t b = (w.session_id - 1) * 10 + w.sample_id;
    for (std::size_t r = 0; r < 90; ++r)
      for (std::size_t t = 0; t < 50; ++t)
        worst = std::max(worst, std::abs(double(w.window[r * 50 + t]) - rec[(b * 90 + r) * 250 + w.window_index * 50 + t]));
  }

  // Every single-byte corruption of a frame is detected.
  std::size_t missed = 0, tried = 0;
  const auto& good = framed[0][0];
  for (std::size_t i = 0; i < good.size(); ++i) {
    for (std::uint8_t mask : {0x01, 0x80, 0xFF}) {
      auto bad = good;
      bad[i] ^= mask;
      ++tried;
      try {
        stream::decode_frame(bad);
        ++missed;
      } catch (const stream::FrameError&) {
      }
    }
  }
  const double elapsed = seconds_since(t0);
  const bool ok = predictions.size() == 20 && windows.size() == 100 && worst <= kStreamTol && missed == 0 &&
                  elapsed < kStreamBudgetS;
  return {ok, fmt::format("{} predictions, {} windows, max diff {:.1e}; {}/{} corruptions detected; {:.1f} s",
                          predictions.size(), windows.size(), worst, tried - missed, tried, elapsed)};
}

// --- 8 ------------------------------------------------------------------------------

Outcome determinism_and_resume() {
  namespace fs = std::filesystem;
  const auto split = data::normalize(data::generate_synthetic({}, {32, 7, 7}));
  const fs::path dir = fs::temp_directory_path() / "rscnet_acceptance_resume";
  std::string detail;
  bool ok = true;
  for (auto optimizer : {train::Optimizer::sgd, train::Optimizer::adam}) {
    train::TrainConfig tc;
    tc.optimizer = optimizer;
    tc.learning_rate = optimizer == train::Optimizer::adam ? 3e-4 : 0.01;
    tc.epochs = 2;
    tc.batch_size = 8;
    tc.seed = 11;
    fs::remove_all(dir);
    auto same_params = [](model::RscnetModel<float>& a, model::RscnetModel<float>& b) {
      auto pa = a.named_parameters(), pb = b.named_parameters();
      for (std::size_t i = 0; i < pa.size(); ++i)
        if (!(pa[i].second.value() == pb[i].second.value())) return false;
      auto ba = a.named_buffers(), bb = b.named_buffers();
      for (std::size_t i = 0; i < ba.size(); ++i)
        if (!(*ba[i].second == *bb[i].second)) return false;
      return true;
    };
    auto same_history = [](const train::TrainReport& a, const train::TrainReport& b) {
      if (a.epochs.size() != b.epochs.size()) return false;
      for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        const auto &x = a.epochs[i], &y = b.epochs[i];
        if (x.train_loss != y.train_loss || x.loss_c != y.loss_c || x.loss_r != y.loss_r ||
            x.val_accuracy != y.val_accuracy || x.val_nmse_db != y.val_nmse_db || x.lr != y.lr)
          return false;
      }
      return true;
    };
    model::RscnetModel<float> a(model::ModelConfig{}, 5), b(model::ModelConfig{}, 5);
    const auto ra = train::train(a, split, tc, {dir / "a", {}, 0, {}});
    const auto rb = train::train(b, split, tc);
    const bool repeat = same_params(a, b) && same_history(ra.report, rb.report);

    model::RscnetModel<float> first(model::ModelConfig{}, 5), second(model::ModelConfig{}, 99);
    train::train(first, split, tc, {dir / "cut", {}, 3, {}});
    const auto rc = train::train(second, split, tc, {dir / "cut", dir / "cut/checkpoints/last.rsck", 0, {}});
    const bool resumed = rc.completed && same_params(a, second) && same_history(ra.report, rc.report);
    ok = ok && repeat && resumed;
    detail += fmt::format("{}: repeat {}, resume {}; ", optimizer == train::Optimizer::adam ? "adam" : "sgd",
                          repeat ? "identical" : "differs", resumed ? "identical" : "differs");
  }
  fs::remove_all(dir);
  return {ok, detail + "32-bit"};
}

// --- 9 ------------------------------------------------------------------------------

Outcome overhead_accounting() {
  model::ModelConfig cfg;
  model::RscnetModel<float> net(cfg, 909);
  std::mt19937_64 rng(910);
  std::vector<Array<float>> one{random_array({3, 30, 250}, rng, 0.2, 2.0).cast<float>()};
  auto pipe = std::make_shared<stream::Loopback>();
  stream::LoopbackSink sink(pipe);
  const auto edge = stream::edge_run(stream::sample_frames(one), net, {}, sink);
  bool sizes = true;
  for (const auto& w : edge.windows) sizes = sizes && w.bytes == 221;
  const double eta = cfg.compression_ratio;
  const auto report = stream::overhead_report(cfg, edge.frames);
  const double ratio = report.ratio;
  const bool ok = edge.frames == 5 && sizes && edge.sent_bytes == 1105 && pipe->size() == 1105 &&
                  edge.raw_bytes == 22500 * 4 && report.sent_bytes == edge.sent_bytes && ratio >= eta &&
                  ratio <= kOverheadSlack * eta;
  return {ok, fmt::format("{} frames, {} bytes for {} raw, ratio {:.6f} in [{:.6f}, {:.6f}]", edge.frames,
                          edge.sent_bytes, edge.raw_bytes, ratio, eta, kOverheadSlack * eta)};
}

}  // namespace
}  // namespace rscnet

int main(int argc, char** argv) {
  using namespace rscnet;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"conv oracle", conv_oracle},
      {"compression arithmetic", compression_arithmetic},
      {"windowing bijection", windowing_bijection},
      {"synthetic end-to-end training", synthetic_training},
      {"FLOPs counter", flops_counter},
      {"streaming equivalence", streaming_equivalence},
      {"determinism and resume", determinism_and_resume},
      {"overhead accounting", overhead_accounting},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = int(i) + 1;
    if (!selected.empty() && !selected.contains(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
