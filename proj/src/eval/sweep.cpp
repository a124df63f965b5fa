#include "rscnet/eval/sweep.hpp"

#include <charconv>
#include <fstream>

#include <fmt/os.h>

#include "rscnet/eval/chart.hpp"

namespace rscnet::eval {

SweepAxis parse_axis(const std::string& name) {
  if (name == "N_f" || name == "nf" || name == "frames") return SweepAxis::frames;
  if (name == "eta" || name == "η" || name == "ratio") return SweepAxis::ratio;
  if (name == "rho" || name == "ρ" || name == "expansion") return SweepAxis::expansion;
  throw ConfigError(fmt::format("unknown sweep axis '{}' (expected N_f, eta or rho)", name));
}

std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::frames: return "N_f";
    case SweepAxis::ratio: return "eta";
    case SweepAxis::expansion: return "rho";
  }
  return "?";
}

namespace {

std::size_t parse_count(const std::string& text, const char* what) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{} must be a positive integer, got '{}'", what, text));
  return v;
}

}  // namespace

model::ModelConfig apply_axis(model::ModelConfig base, SweepAxis axis, const std::string& value) {
  switch (axis) {
    case SweepAxis::frames: base.window_frames = parse_count(value, "window_frames"); break;
    case SweepAxis::ratio: base.compression_ratio = model::parse_ratio(value); break;
    case SweepAxis::expansion: base.expansion_rate = parse_count(value, "expansion_rate"); break;
  }
  base.validate();
  return base;
}

void write_sweep_csv(const std::filesystem::path& path, SweepAxis axis, const std::vector<SweepRow>& rows) {
  auto out = fmt::output_file(path.string());
  out.print("{}\n", kSweepHeader);
  for (const auto& row : rows) {
    const auto& r = row.result;
    out.print("{},{},{},{},{},{},{},{},{},{},{},{}\n", axis_name(axis), row.value, r.config.compressed_dim(),
              r.accuracy, r.nmse_db, r.nmse_db_pooled, r.nmse_db_raw, r.flops.encoder, r.flops.recurrent,
              r.flops.decoder, r.flops.classifier, r.flops.per_sample());
  }
}

SweepOutcome run_sweep(SweepAxis axis, const std::vector<std::string>& values, const model::ModelConfig& base,
                       const train::TrainConfig& train_config, const data::DatasetSplit& split,
                       const std::filesystem::path& out_dir) {
  SweepOutcome outcome;
  const auto& scored = split.test.empty() ? split.val : split.test;
  check_config(!scored.empty(), "sweep: need a test or validation split to score");
  for (const auto& value : values) {
    model::ModelConfig config;
    try {
      config = apply_axis(base, axis, value);
    } catch (const ConfigError& e) {
      outcome.skipped.emplace_back(value, e.what());
      continue;
    }
    model::RscnetModel<float> model(config, train_config.seed);
    auto trained = train::train(model, split, train_config);
    model.load_state_dict({trained.best_state.begin(), trained.best_state.end()});
    outcome.rows.push_back({value, evaluate(model, scored, &split.stats), std::move(trained.report)});
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir / "charts");
    write_sweep_csv(out_dir / "sweep.csv", axis, outcome.rows);
    std::vector<std::string> categories;
    Series acc{"accuracy", {}}, nmse{"NMSE (dB)", {}}, pooled{"NMSE pooled (dB)", {}};
    for (const auto& row : outcome.rows) {
      categories.push_back(row.value);
      acc.values.push_back(row.result.accuracy);
      nmse.values.push_back(row.result.nmse_db);
      pooled.values.push_back(row.result.nmse_db_pooled);
    }
    const std::string name = axis_name(axis);
    std::ofstream(out_dir / "charts" / ("sweep_" + name + "_accuracy.svg"))
        << line_chart_svg("Accuracy vs " + name, name, "accuracy", categories, {acc});
    std::ofstream(out_dir / "charts" / ("sweep_" + name + "_nmse.svg"))
        << line_chart_svg("Reconstruction NMSE vs " + name, name, "dB", categories, {nmse, pooled});
  }
  return outcome;
}

}  // namespace rscnet::eval
