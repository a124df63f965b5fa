#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "rscnet/data/synthetic.hpp"
#include "rscnet/train/train.hpp"
#include "support/oracles.hpp"

namespace rscnet::train {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

data::DatasetSplit smoke_data(std::size_t train = 32) {
  return data::normalize(data::generate_synthetic({}, {train, 7, 7}));
}

TrainConfig smoke_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.seed = 11;
  return c;
}

bool same_history(const TrainReport& a, const TrainReport& b) {
  if (a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const auto &x = a.epochs[i], &y = b.epochs[i];
    auto eq = [](float p, float q) { return (std::isnan(p) && std::isnan(q)) || p == q; };
    if (x.epoch != y.epoch || !eq(x.train_loss, y.train_loss) || !eq(x.loss_c, y.loss_c) || !eq(x.loss_r, y.loss_r) ||
        !eq(x.val_accuracy, y.val_accuracy) || !eq(x.val_nmse_db, y.val_nmse_db) || !eq(x.lr, y.lr)) {
      return false;
    }
  }
  return a.best_epoch == b.best_epoch && a.steps == b.steps;
}

TEST(TotalLoss, Examples) {
  // Two classes with logits {0, ln(e - 1)}: cross entropy is exactly 1.
  Array<double> logits({1, 2}, {0.0, std::log(std::exp(1.0) - 1.0)});
  const int label[] = {0};
  auto h = Tensor<double>::constant(Array<double>({4}));
  auto e = Tensor<double>::constant(Array<double>({4}, 0.1));
  auto terms = loss_terms(Tensor<double>::constant(logits), label, h, e, 50.0);
  EXPECT_NEAR(terms.classification.item(), 1.0, 1e-12);
  EXPECT_NEAR(terms.reconstruction.item(), 0.01, 1e-12);
  EXPECT_NEAR(terms.total.item(), 1.5, 1e-12);

  EXPECT_EQ(total_loss(Tensor<double>::constant(logits), label, h, e, 0.0).item(), terms.classification.item());
  EXPECT_THROW(total_loss(Tensor<double>::constant(logits), label, h, e, -1.0), ConfigError);

  Array<double> perfect({1, 3}, {80.0, 0.0, 0.0});
  EXPECT_LT(total_loss(Tensor<double>::constant(perfect), label, h, h, 50.0).item(), 1e-30);
}

TEST(TrainConfig, JsonAndValidation) {
  TrainConfig c;
  EXPECT_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.momentum, 0.9);
  EXPECT_EQ(c.weight_decay, 1.5e-6);
  EXPECT_EQ(c.batch_size, 512u);
  EXPECT_EQ(c.epochs, 300u);
  EXPECT_EQ(c.loss_weight, 50.0);
  EXPECT_EQ(c.optimizer, Optimizer::sgd);
  nlohmann::json j = smoke_config();
  EXPECT_EQ(j.get<TrainConfig>(), smoke_config());
  EXPECT_EQ(j["optimizer"], "sgd");
  j["optimizer"] = "adam";
  EXPECT_EQ(j.get<TrainConfig>().optimizer, Optimizer::adam);
  j["optimizer"] = "rmsprop";
  EXPECT_THROW(j.get<TrainConfig>(), ConfigError);
  j["optimizer"] = "sgd";
  j["epoch"] = 3;
  EXPECT_THROW(j.get<TrainConfig>(), ConfigError);
  c.loss_weight = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(EpochOrder, PureFunctionOfSeedAndEpoch) {
  EXPECT_EQ(epoch_order(1, 3, 50), epoch_order(1, 3, 50));
  EXPECT_NE(epoch_order(1, 3, 50), epoch_order(1, 4, 50));
  EXPECT_NE(epoch_order(1, 3, 50), epoch_order(2, 3, 50));
  auto o = epoch_order(9, 0, 100);
  std::sort(o.begin(), o.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(o[i], i);
}

TEST(Train, SmokeLossDecreasesAndIsDeterministic) {
  auto split = smoke_data();
  model::RscnetModel<float> a(model::ModelConfig{}, 5), b(model::ModelConfig{}, 5);
  auto ra = train(a, split, smoke_config());
  auto rb = train(b, split, smoke_config());
  ASSERT_EQ(ra.report.epochs.size(), 2u);
  EXPECT_LT(ra.report.epochs[1].train_loss, ra.report.epochs[0].train_loss);
  EXPECT_TRUE(same_history(ra.report, rb.report));
  EXPECT_EQ(ra.report.steps, 8u);
  EXPECT_EQ(ra.report.loss_weight, 50.0);
  auto pa = a.named_parameters(), pb = b.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second.value(), pb[i].second.value()) << pa[i].first;
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  auto split = smoke_data();
  TempDir dir("rscnet_resume");
  model::RscnetModel<float> full(model::ModelConfig{}, 6);
  auto reference = train(full, split, smoke_config(), {dir.path / "full", {}, 0, {}});

  // Stop after 2 of the 4 steps of epoch 1, then continue from disk in a
  // freshly initialized model.
  model::RscnetModel<float> first(model::ModelConfig{}, 6);
  auto partial = train(first, split, smoke_config(), {dir.path / "cut", {}, 2, {}});
  EXPECT_FALSE(partial.completed);
  EXPECT_TRUE(partial.report.epochs.empty());
  model::RscnetModel<float> second(model::ModelConfig{}, 77);
  auto resumed = train(second, split, smoke_config(), {dir.path / "cut", dir.path / "cut/checkpoints/last.rsck", 0, {}});
  EXPECT_TRUE(resumed.completed);
  EXPECT_TRUE(same_history(reference.report, resumed.report));

  auto pa = full.named_parameters(), pb = second.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second.value(), pb[i].second.value()) << pa[i].first;
  auto ba = full.named_buffers(), bb = second.named_buffers();
  for (std::size_t i = 0; i < ba.size(); ++i) EXPECT_EQ(*ba[i].second, *bb[i].second) << ba[i].first;
  ASSERT_EQ(reference.best_state.size(), resumed.best_state.size());
  for (std::size_t i = 0; i < reference.best_state.size(); ++i) {
    EXPECT_EQ(reference.best_state[i].second, resumed.best_state[i].second);
  }

  // Outputs land where the command line expects them.
  for (const char* f : {"report.csv", "summary.json", "config.json", "checkpoints/best.rsck", "checkpoints/last.rsck"}) {
    EXPECT_TRUE(fs::exists(dir.path / "full" / f)) << f;
  }
  std::ifstream csv(dir.path / "full" / "report.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, kReportHeader);
  auto summary = nlohmann::json::parse(std::ifstream(dir.path / "full" / "summary.json"));
  EXPECT_EQ(summary["loss_weight"], 50.0);
  EXPECT_EQ(summary["train"]["weight_decay"], 1.5e-6);

  auto best = model::load_checkpoint(dir.path / "full/checkpoints/best.rsck");
  EXPECT_EQ(checkpoint_stats(best).mean, split.stats.mean);

  // A different seed cannot continue this run.
  auto other = smoke_config();
  other.seed = 12;
  model::RscnetModel<float> third(model::ModelConfig{}, 6);
  EXPECT_THROW(train(third, split, other, {{}, dir.path / "cut/checkpoints/last.rsck", 0, {}}), ConfigError);

  std::fstream corrupt(dir.path / "cut/checkpoints/last.rsck", std::ios::in | std::ios::out | std::ios::binary);
  corrupt.put('Z');
  corrupt.close();
  EXPECT_THROW(train(third, split, smoke_config(), {{}, dir.path / "cut/checkpoints/last.rsck", 0, {}}), FormatError);
}

TEST(Train, AdamResumeMatchesUninterruptedRun) {
  auto split = smoke_data();
  TempDir dir("rscnet_resume_adam");
  auto config = smoke_config();
  config.optimizer = Optimizer::adam;
  config.learning_rate = 3e-4;
  model::RscnetModel<float> full(model::ModelConfig{}, 6);
  auto reference = train(full, split, config);
  model::RscnetModel<float> first(model::ModelConfig{}, 6), second(model::ModelConfig{}, 77);
  train(first, split, config, {dir.path, {}, 3, {}});
  auto resumed = train(second, split, config, {dir.path, dir.path / "checkpoints/last.rsck", 0, {}});
  EXPECT_TRUE(same_history(reference.report, resumed.report));
  auto pa = full.named_parameters(), pb = second.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second.value(), pb[i].second.value()) << pa[i].first;

  // The optimizer is part of the run's identity.
  model::RscnetModel<float> third(model::ModelConfig{}, 6);
  EXPECT_THROW(train(third, split, smoke_config(), {{}, dir.path / "checkpoints/last.rsck", 0, {}}), ConfigError);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  auto split = smoke_data(8);
  model::RscnetModel<float> m(model::ModelConfig{}, 7);
  auto before = m.state_dict();
  auto cfg = smoke_config();
  cfg.learning_rate = 0.0;
  cfg.epochs = 1;
  train(m, split, cfg);
  auto params = m.named_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(params[i].second.value(), before[i].second) << params[i].first;
  }
}

TEST(Train, NonFiniteLossNamesTheStep) {
  auto split = smoke_data(8);
  split.train[3].amplitude.fill(3e38f);
  model::RscnetModel<float> m(model::ModelConfig{}, 8);
  auto cfg = smoke_config();
  cfg.batch_size = 1;
  try {
    train(m, split, cfg);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    const std::string what = e.what();
    const auto order = epoch_order(cfg.seed, 0, 8);
    const auto step = std::find(order.begin(), order.end(), 3u) - order.begin();
    EXPECT_NE(what.find(fmt::format("step {} ", step)), std::string::npos) << what;
  }
}

TEST(Train, RejectsUnnormalizedOrMismatchedData) {
  auto raw = data::generate_synthetic({}, {7, 0, 0});
  model::RscnetModel<float> m(model::ModelConfig{}, 9);
  EXPECT_THROW(train(m, raw, smoke_config()), ConfigError);
  model::ModelConfig other;
  other.n_timesteps = 100;
  model::RscnetModel<float> wrong(other, 9);
  EXPECT_THROW(train(wrong, data::normalize(raw), smoke_config()), ConfigError);
}

// --- gradients of the joint objective --------------------------------------

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.n_antennas = 2;
  c.n_subcarriers = 4;
  c.n_timesteps = 10;
  c.window_frames = 5;
  c.compression_ratio = 3.0 / 40.0;
  c.encoder_width = 2;
  c.n_classes = 3;
  c.classifier_hidden = {6, 4};
  return c;
}

template <typename T>
Tensor<T> objective(const model::RscnetModel<T>& m, const Tensor<T>& x, std::span<const int> labels, double lambda) {
  auto out = m.forward(x, true);
  return total_loss(out.logits, labels, x, out.reconstruction, lambda);
}

TEST(Gradients, SinglePrecisionAgreesWithFiniteDifferences) {
  const auto cfg = tiny_config();
  model::RscnetModel<float> m32(cfg, 13);
  model::RscnetModel<double> m64(cfg, 0);
  auto state = m32.state_dict();
  m64.load_state_dict({state.begin(), state.end()});
  std::mt19937_64 rng(14);
  auto x = rscnet::testing::random_array({3, 2, 4, 10}, rng, 0, 1).cast<float>();
  const int labels[] = {2, 0, 1};

  objective(m32, Tensor<float>::constant(x), labels, 50.0).backward();
  auto x64 = Tensor<double>::constant(x.cast<double>());
  auto params64 = m64.parameters();
  auto params32 = m32.named_parameters();
  for (std::size_t k = 0; k < params64.size(); ++k) {
    auto& values = params64[k].mutable_value();
    double diff = 0, norm = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i], step = 1e-6;
      values[i] = saved + step;
      const double up = objective(m64, x64, labels, 50.0).item();
      values[i] = saved - step;
      const double down = objective(m64, x64, labels, 50.0).item();
      values[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double analytic = params32[k].second.grad()[i];
      diff += (numeric - analytic) * (numeric - analytic);
      norm += numeric * numeric;
    }
    EXPECT_LT(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-6), 1e-3) << params32[k].first;
  }
}

TEST(Gradients, ClassificationOnlyObjective) {
  const auto cfg = tiny_config();
  model::RscnetModel<double> m(cfg, 15);
  std::mt19937_64 rng(16);
  auto x = Tensor<double>::constant(rscnet::testing::random_array({2, 2, 4, 10}, rng, 0, 1));
  const int labels[] = {1, 2};

  objective(m, x, labels, 0.0).backward();
  std::map<std::string, Array<double>> joint;
  for (auto& [name, t] : m.named_parameters()) {
    if (name.starts_with("decoder.")) {
      for (double g : t.grad().values()) EXPECT_EQ(g, 0.0) << name;
    } else {
      joint[name] = t.grad();
    }
  }
  // The same loss built without ever running the decoder.
  auto windows = m.encode(ops::split_windows(x, cfg.window_frames), true);
  auto rec = m.recurrent(ops::reshape(windows, {2, cfg.window_count(), cfg.compressed_dim()}));
  auto logits = m.classify(ops::reshape(rec.hidden, {2, cfg.embedding_dim()})).logits;
  ops::cross_entropy(logits, std::span<const int>(labels)).backward();
  for (auto& [name, t] : m.named_parameters()) {
    if (name.starts_with("decoder.")) continue;
    EXPECT_EQ(t.grad(), joint[name]) << name;
  }
}

}  // namespace
}  // namespace rscnet::train
