#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rscnet/model/config.hpp"
#include "rscnet/train/train.hpp"

namespace rscnet::cli {

// Model and training settings plus paths. Loaded from --config, then
// individual flags override.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  std::string manifest;
  std::string checkpoint;
  std::string out;
};

// {"model": {...}, "train": {...}, "manifest": "", "checkpoint": "", "out": ""}
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Raw flag values shared by every subcommand.
struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<std::string> manifest;
  std::optional<std::size_t> nf;
  std::optional<std::string> eta;
  std::optional<std::size_t> rho;
  std::optional<double> lambda;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<std::string> optimizer;
  std::string resume;
  std::string split = "test";
  std::size_t per_class = 100;
  std::size_t val = 100;
  std::size_t test = 100;
  std::string axis;
  std::vector<std::string> values;
  std::string listen = "127.0.0.1:7878";
  std::string connect = "127.0.0.1:7878";
  std::uint32_t session = 0;
  std::size_t retries = 2;
  std::size_t limit = 0;
  bool continuous = false;
  double timeout = 30.0;
  std::size_t max_connections = 0;
  std::string reconstructions;
};

// Loads --config, applies flag overrides and validates the result.
RunConfig resolve(const Args& args);

// The command tree; parsed values land in `args`.
std::unique_ptr<CLI::App> make_app(Args& args);

// Full dispatch: 0 success, 1 usage error, 2 runtime failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& argv);

}  // namespace rscnet::cli
