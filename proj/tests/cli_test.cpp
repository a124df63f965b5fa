#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "rscnet/data/dataset.hpp"

namespace rscnet::cli {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rscnet_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Silences stdout for the scope, releasing it even when an assertion returns early.
struct QuietStdout {
  QuietStdout() { testing::internal::CaptureStdout(); }
  ~QuietStdout() { testing::internal::GetCapturedStdout(); }
  QuietStdout(const QuietStdout&) = delete;
  QuietStdout& operator=(const QuietStdout&) = delete;
};

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rscnet");
  return run(args);
}

TEST(Cli, SubcommandsAreTheDocumentedSet) {
  Args args;
  auto app = make_app(args);
  std::set<std::string> names;
  for (const auto* sub : app->get_subcommands({})) names.insert(sub->get_name());
  EXPECT_EQ(names, (std::set<std::string>{"train", "eval", "sweep", "flops", "synth", "export-embeddings", "edge",
                                          "cloud"}));
}

TEST(Cli, HelpDocumentsEveryFlag) {
  Args args;
  auto app = make_app(args);
  for (auto* sub : app->get_subcommands({})) {
    EXPECT_FALSE(sub->get_description().empty()) << sub->get_name();
    const std::string help = sub->help();
    for (const auto* opt : sub->get_options()) {
      EXPECT_FALSE(opt->get_description().empty()) << sub->get_name() << " " << opt->get_name();
      for (const auto& name : opt->get_lnames())
        EXPECT_NE(help.find("--" + name), std::string::npos) << sub->get_name() << " --" << name;
    }
  }
}

TEST(Cli, ExitCodes) {
  testing::internal::CaptureStderr();
  testing::internal::CaptureStdout();
  EXPECT_EQ(run_cli({}), 1);
  EXPECT_EQ(run_cli({"bogus"}), 1);
  EXPECT_EQ(run_cli({"flops", "--no-such-flag"}), 1);
  EXPECT_EQ(run_cli({"flops", "--nf", "7"}), 2);
  EXPECT_EQ(run_cli({"eval"}), 2);
  EXPECT_EQ(run_cli({"flops", "--help"}), 0);
  testing::internal::GetCapturedStdout();
  const auto err = testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find("window_frames"), std::string::npos) << err;
  EXPECT_NE(err.find("--checkpoint is required"), std::string::npos) << err;
}

TEST(Cli, FlagsOverrideTheConfigFile) {
  const auto dir = scratch("config");
  std::ofstream(dir / "run.json") << R"({"model": {"window_frames": 25, "compression_ratio": 0.02},
                                        "train": {"epochs": 3, "loss_weight": 2}, "out": "x"})";
  Args a;
  a.config = (dir / "run.json").string();
  a.nf = 50;
  a.lambda = 7.0;
  const auto rc = resolve(a);
  EXPECT_EQ(rc.model.window_frames, 50u);
  EXPECT_DOUBLE_EQ(rc.model.compression_ratio, 0.02);
  EXPECT_EQ(rc.train.epochs, 3u);
  EXPECT_DOUBLE_EQ(rc.train.loss_weight, 7.0);
  EXPECT_DOUBLE_EQ(rc.model.loss_weight, 7.0);
  EXPECT_EQ(rc.out, "x");

  std::ofstream(dir / "bad.json") << R"({"model": {"window_frame": 25}})";
  a.config = (dir / "bad.json").string();
  try {
    resolve(a);
    FAIL() << "accepted an unknown key";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("window_frame"), std::string::npos) << e.what();
  }
}

TEST(Cli, FlopsReportsDecoderRatio) {
  const auto dir = scratch("flops");
  testing::internal::CaptureStdout();
  ASSERT_EQ(run_cli({"flops", "--nf", "50", "--eta", "1/90", "--out", dir.string()}), 0);
  const auto out = testing::internal::GetCapturedStdout();
  EXPECT_NE(out.find("rho=1 3393000  rho=5 29313000  ratio 8.64"), std::string::npos) << out;
  const auto csv = slurp(dir / "flops.csv");
  EXPECT_NE(csv.find("50,5,50,10296000,40200,3393000,388864,69034864"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(dir / "charts" / "flops.svg"));
}

TEST(Cli, SynthIsDeterministic) {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  testing::internal::CaptureStdout();
  for (const auto& dir : {a, b})
    ASSERT_EQ(run_cli({"synth", "--seed", "7", "--per-class", "3", "--val", "4", "--test", "4", "--out", dir.string()}),
              0);
  testing::internal::GetCapturedStdout();
  for (const char* f : {"manifest.json", "train.f32", "train.u8", "val.f32", "test.u8"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const auto split = data::load_dataset(a / "manifest.json");
  EXPECT_EQ(split.train.size(), 21u);
  EXPECT_EQ(split.val.size(), 4u);
}

TEST(Cli, EvalReproducesTrainingValidationAccuracy) {
  const auto dir = scratch("train_eval");
  {
    QuietStdout quiet;
    ASSERT_EQ(run_cli({"synth", "--seed", "3", "--per-class", "2", "--val", "7", "--test", "7", "--out",
                       (dir / "data").string()}),
              0);
    const std::string manifest = (dir / "data" / "manifest.json").string();
    ASSERT_EQ(run_cli({"train", "--manifest", manifest, "--epochs", "2", "--batch", "7", "--lr", "0.05", "--lambda",
                       "1", "--out", (dir / "run").string()}),
              0);
    ASSERT_EQ(run_cli({"eval", "--manifest", manifest, "--split", "val", "--checkpoint",
                       (dir / "run" / "checkpoints" / "best.rsck").string(), "--out", (dir / "eval").string()}),
              0);
  }
  for (const char* f : {"report.csv", "summary.json", "config.json", "test_eval.json", "charts/loss.svg"})
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  const auto summary = nlohmann::json::parse(slurp(dir / "run" / "summary.json"));
  const auto eval = nlohmann::json::parse(slurp(dir / "eval" / "eval.json"));
  EXPECT_NEAR(eval["accuracy"].get<double>(), summary["best_val_accuracy"].get<double>(), 1e-6)
      << summary.dump();

  // The written config reproduces the run's settings.
  Args a;
  a.config = (dir / "run" / "config.json").string();
  const auto rc = resolve(a);
  EXPECT_EQ(rc.train.epochs, 2u);
  EXPECT_EQ(rc.train.batch_size, 7u);
}

TEST(Cli, EdgeAndCloudOverTcp) {
  const auto dir = scratch("stream");
  const std::string manifest = (dir / "data" / "manifest.json").string();
  const std::string ckpt = (dir / "run" / "checkpoints" / "best.rsck").string();
  {
    QuietStdout quiet;
    ASSERT_EQ(run_cli({"synth", "--seed", "4", "--per-class", "1", "--val", "2", "--test", "3", "--out",
                       (dir / "data").string()}),
              0);
    ASSERT_EQ(run_cli({"train", "--manifest", manifest, "--epochs", "1", "--batch", "7", "--lambda", "1", "--out",
                       (dir / "run").string()}),
              0);
    ASSERT_EQ(run_cli({"export-embeddings", "--manifest", manifest, "--checkpoint", ckpt, "--out",
                       (dir / "emb").string()}),
              0);
  }
  for (const char* stage : {"raw", "compressed", "recurrent", "classifier"})
    EXPECT_TRUE(fs::exists(dir / "emb" / (std::string(stage) + ".csv"))) << stage;

  const std::string port = "47391";
  int cloud_rc = -1;
  testing::internal::CaptureStdout();
  std::thread cloud([&] {
    cloud_rc = run_cli({"cloud", "--checkpoint", ckpt, "--listen", "127.0.0.1:" + port, "--max-connections", "1",
                        "--out", (dir / "pred.ndjson").string(), "--reconstructions", (dir / "recon").string()});
  });
  testing::internal::CaptureStderr();
  int edge_rc = 2;
  for (int attempt = 0; attempt < 100 && edge_rc != 0; ++attempt) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    edge_rc = run_cli({"edge", "--manifest", manifest, "--checkpoint", ckpt, "--connect", "127.0.0.1:" + port,
                       "--session", "9", "--limit", "2"});
  }
  cloud.join();
  testing::internal::GetCapturedStderr();
  const auto out = testing::internal::GetCapturedStdout();
  ASSERT_EQ(edge_rc, 0);
  ASSERT_EQ(cloud_rc, 0);
  EXPECT_NE(out.find("session 9: 2 samples, 10 frames, 2210 bytes"), std::string::npos) << out;

  std::istringstream lines(slurp(dir / "pred.ndjson"));
  std::vector<nlohmann::json> preds;
  for (std::string line; std::getline(lines, line);) preds.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[0]["session"], 9);
  EXPECT_EQ(preds[1]["sample"], 1);
  EXPECT_EQ(preds[0]["logits"].size(), 7u);

  const auto recon = data::load_dataset(dir / "recon" / "manifest.json");
  ASSERT_EQ(recon.test.size(), 2u);
  EXPECT_EQ(recon.test[0].label, preds[0]["class"].get<int>());
}

}  // namespace
}  // namespace rscnet::cli
