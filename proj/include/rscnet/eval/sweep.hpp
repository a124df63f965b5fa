#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rscnet/eval/metrics.hpp"
#include "rscnet/train/train.hpp"

namespace rscnet::eval {

enum class SweepAxis { frames, ratio, expansion };

// Accepts "N_f"/"nf", "eta"/"η", "rho"/"ρ".
SweepAxis parse_axis(const std::string& name);
std::string axis_name(SweepAxis axis);

// Returns `base` with the axis set to `value`; throws ConfigError if the
// value is malformed or the resulting config is invalid.
model::ModelConfig apply_axis(model::ModelConfig base, SweepAxis axis, const std::string& value);

struct SweepRow {
  std::string value;
  EvalResult result;  // best-validation state, scored on the test split
  train::TrainReport report;
};

struct SweepOutcome {
  std::vector<SweepRow> rows;
  std::vector<std::pair<std::string, std::string>> skipped;  // value, reason
};

inline constexpr const char* kSweepHeader =
    "axis,value,compressed_dim,accuracy,nmse_db,nmse_db_pooled,nmse_db_raw,encoder_flops,recurrent_flops,"
    "decoder_flops,classifier_flops,sample_flops";

// Trains and evaluates one model per value, every run from the same seed.
// Invalid values are skipped and reported; the sweep carries on. When
// `out_dir` is set, writes sweep.csv and charts/sweep_<axis>_{accuracy,nmse}.svg.
SweepOutcome run_sweep(SweepAxis axis, const std::vector<std::string>& values, const model::ModelConfig& base,
                       const train::TrainConfig& train_config, const data::DatasetSplit& split,
                       const std::filesystem::path& out_dir = {});

void write_sweep_csv(const std::filesystem::path& path, SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace rscnet::eval
