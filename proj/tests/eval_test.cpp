#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rscnet/data/synthetic.hpp"
#include "rscnet/eval/chart.hpp"
#include "rscnet/eval/metrics.hpp"
#include "rscnet/eval/sweep.hpp"
#include "support/oracles.hpp"

namespace rscnet::eval {
namespace {

namespace fs = std::filesystem;

std::vector<Array<float>> random_set(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Array<float>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rscnet::testing::random_array({2, 3, 4}, rng).cast<float>());
  return out;
}

std::vector<Array<float>> scaled(const std::vector<Array<float>>& set, float factor) {
  auto out = set;
  for (auto& a : out) {
    for (auto& v : a.values()) v *= factor;
  }
  return out;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Nmse, Examples) {
  auto h = random_set(5, 1);
  EXPECT_EQ(nmse_db(h, h), -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(nmse_db(h, scaled(h, 0.0f)), 0.0, 1e-12);
  EXPECT_NEAR(nmse_db(h, scaled(h, 1.1f)), -20.0, 1e-4);
  EXPECT_NEAR(nmse_db_pooled(h, scaled(h, 1.1f)), -20.0, 1e-4);

  auto zero = h;
  zero[2].fill(0.0f);
  EXPECT_THROW(nmse_db(zero, h), NumericError);
  EXPECT_THROW(nmse_db(h, random_set(4, 2)), ShapeError);
}

TEST(Nmse, MeanOfRatiosDiffersFromPooled) {
  std::vector<Array<float>> h{Array<float>({2}, {1, 0}), Array<float>({2}, {10, 0})};
  std::vector<Array<float>> e{Array<float>({2}, {0.5, 0}), Array<float>({2}, {10, 1})};
  EXPECT_NEAR(nmse_db(h, e), 10 * std::log10((0.25 + 0.01) / 2), 1e-9);
  EXPECT_NEAR(nmse_db_pooled(h, e), 10 * std::log10(1.25 / 101), 1e-9);
}

TEST(Nmse, ProjectionNeverHurts) {
  auto h = random_set(20, 3);
  auto e = random_set(20, 4);
  std::vector<Array<float>> onto_h, rescaled;
  for (std::size_t i = 0; i < h.size(); ++i) {
    double he = 0, hh = 0, ee = 0;
    for (std::size_t k = 0; k < h[i].size(); ++k) {
      he += double(h[i][k]) * e[i][k];
      hh += double(h[i][k]) * h[i][k];
      ee += double(e[i][k]) * e[i][k];
    }
    onto_h.push_back(scaled({h[i]}, float(he / hh))[0]);
    rescaled.push_back(scaled({e[i]}, float(he / ee))[0]);
  }
  EXPECT_LE(nmse_db(h, onto_h), nmse_db(h, e));
  EXPECT_LE(nmse_db(h, rescaled), nmse_db(h, e));
}

TEST(Accuracy, Examples) {
  Array<float> logits({3, 3}, {5, 0, 0, 0, 5, 0, 0, 0, 5});
  const int right[] = {0, 1, 2}, wrong[] = {1, 2, 0};
  EXPECT_EQ(accuracy(logits, right), 1.0);
  EXPECT_EQ(accuracy(logits, wrong), 0.0);
  const float tie[] = {1, 3, 3, 2};
  EXPECT_EQ(argmax(tie), 1u);
}

TEST(Accuracy, RandomLabelsNearChance) {
  std::mt19937_64 rng(5);
  const std::size_t n = 20000;
  auto logits = rscnet::testing::random_array({n, 7}, rng).cast<float>();
  std::uniform_int_distribution<int> cls(0, 6);
  std::vector<int> labels(n);
  for (auto& l : labels) l = cls(rng);
  const double p = 1.0 / 7.0, sigma = std::sqrt(p * (1 - p) / double(n));
  EXPECT_NEAR(accuracy(logits, labels), p, 3 * sigma);
}

TEST(Accuracy, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(6);
  auto logits = rscnet::testing::random_array({50, 7}, rng).cast<float>();
  std::uniform_int_distribution<int> cls(0, 6);
  std::vector<int> labels(50);
  for (auto& l : labels) l = cls(rng);
  auto transformed = logits;
  for (std::size_t i = 0; i < 50; ++i) {
    const float a = 0.5f + float(i), b = float(i) - 20.0f;
    for (std::size_t k = 0; k < 7; ++k) transformed[i * 7 + k] = std::exp(a * logits[i * 7 + k]) + b;
  }
  EXPECT_EQ(accuracy(transformed, labels), accuracy(logits, labels));
}

model::ModelConfig small_config() {
  model::ModelConfig c;
  c.n_timesteps = 20;
  c.window_frames = 10;
  c.classifier_hidden = {16, 8};
  return c;
}

data::DatasetSplit small_data() {
  data::SyntheticChannelConfig s;
  s.n_timesteps = 20;
  return data::normalize(data::generate_synthetic(s, {14, 7, 7}));
}

TEST(Evaluate, ConfusionMatchesCounts) {
  auto split = small_data();
  model::RscnetModel<float> model(small_config(), 1);
  auto r = evaluate(model, split.test, &split.stats);
  EXPECT_EQ(r.count, 7u);
  std::size_t correct = 0;
  for (std::size_t c = 0; c < 7; ++c) {
    std::size_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    EXPECT_EQ(row, 1u);
    correct += r.confusion[c][c];
  }
  EXPECT_DOUBLE_EQ(r.accuracy, double(correct) / 7.0);
  EXPECT_TRUE(std::isfinite(r.nmse_db_raw));
  EXPECT_TRUE(std::isnan(evaluate(model, split.test).nmse_db_raw));
  EXPECT_EQ(to_json(r)["flops"]["decoder"], r.flops.decoder);
}

TEST(Evaluate, ChunkSizeDoesNotMatter) {
  auto split = small_data();
  model::RscnetModel<float> model(small_config(), 2);
  auto a = predict(model, split.train, 3);
  auto b = predict(model, split.train, 100);
  EXPECT_EQ(a.logits, b.logits);
  for (std::size_t i = 0; i < a.reconstructions.size(); ++i) EXPECT_EQ(a.reconstructions[i], b.reconstructions[i]);
}

TEST(Embeddings, StagesAndWidths) {
  auto dir = fs::temp_directory_path() / "rscnet_embeddings";
  fs::remove_all(dir);
  data::SyntheticChannelConfig s;
  auto samples = data::generate_synthetic(s, {3, 0, 0}).train;
  model::ModelConfig cfg;
  model::RscnetModel<float> model(cfg, 3);
  export_embeddings(model, samples, dir, 2);
  const std::size_t widths[] = {22500, 250, 250, 128};
  for (std::size_t k = 0; k < 4; ++k) {
    std::ifstream in(dir / (std::string(kEmbeddingStages[k]) + ".csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    EXPECT_TRUE(line.starts_with("stage,sample_id,label,v0,"));
    while (std::getline(in, line)) {
      EXPECT_EQ(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')), widths[k] + 2);
      EXPECT_TRUE(line.starts_with(std::string(kEmbeddingStages[k]) + "," + std::to_string(rows) + ","));
      ++rows;
    }
    EXPECT_EQ(rows, 3u);
  }
  fs::remove_all(dir);
}

TEST(Charts, WellFormedSvg) {
  auto line = line_chart_svg("t <1>", "x", "y", {"a", "b", "c"}, {{"s1", {1, std::nan(""), 3}}, {"s2", {2, 2, 2}}});
  EXPECT_TRUE(line.starts_with("<svg"));
  EXPECT_TRUE(line.ends_with("</svg>\n"));
  EXPECT_NE(line.find("t &lt;1&gt;"), std::string::npos);
  EXPECT_NE(line.find("s2"), std::string::npos);
  auto bars = bar_chart_svg("flops", "FLOPs", {"enc", "dec"}, {{"rho=1", {1e6, 3e6}}, {"rho=5", {1e6, 3e7}}}, true);
  EXPECT_EQ(std::count(bars.begin(), bars.end(), '\n') > 4, true);
  EXPECT_NE(bars.find("<rect x="), std::string::npos);
}

TEST(Sweep, AxisParsing) {
  EXPECT_EQ(parse_axis("N_f"), SweepAxis::frames);
  EXPECT_EQ(parse_axis("eta"), SweepAxis::ratio);
  EXPECT_EQ(parse_axis("rho"), SweepAxis::expansion);
  EXPECT_THROW(parse_axis("depth"), ConfigError);
  EXPECT_EQ(apply_axis({}, SweepAxis::ratio, "1/4500").compressed_dim(), 1u);
  EXPECT_THROW(apply_axis({}, SweepAxis::frames, "7"), ConfigError);
  EXPECT_THROW(apply_axis({}, SweepAxis::expansion, "x"), ConfigError);
}

TEST(Sweep, SkipsInvalidValuesAndIsReproducible) {
  auto split = small_data();
  train::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 7;
  auto dir = fs::temp_directory_path() / "rscnet_sweep";
  fs::remove_all(dir);
  auto first = run_sweep(SweepAxis::frames, {"5", "3", "10"}, small_config(), tc, split, dir / "a");
  auto second = run_sweep(SweepAxis::frames, {"5", "3", "10"}, small_config(), tc, split, dir / "b");
  ASSERT_EQ(first.rows.size(), 2u);
  ASSERT_EQ(first.skipped.size(), 1u);
  EXPECT_EQ(first.skipped[0].first, "3");
  const auto csv = read(dir / "a" / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv, read(dir / "b" / "sweep.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "charts" / "sweep_N_f_accuracy.svg"));

  // One value equals a direct train + evaluate.
  auto cfg = apply_axis(small_config(), SweepAxis::frames, "10");
  model::RscnetModel<float> model(cfg, tc.seed);
  auto trained = train::train(model, split, tc);
  model.load_state_dict({trained.best_state.begin(), trained.best_state.end()});
  auto direct = evaluate(model, split.test, &split.stats);
  EXPECT_EQ(first.rows[1].result.accuracy, direct.accuracy);
  EXPECT_EQ(first.rows[1].result.nmse_db, direct.nmse_db);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace rscnet::eval
