#include "rscnet/train/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/os.h>

#include "rscnet/eval/metrics.hpp"
#include "rscnet/numerics/optim.hpp"
#include "rscnet/rng.hpp"

namespace rscnet::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  check_config(std::isfinite(learning_rate) && learning_rate >= 0, "learning_rate must be >= 0");
  check_config(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
  check_config(std::isfinite(weight_decay) && weight_decay >= 0, "weight_decay must be >= 0");
  check_config(batch_size >= 1, "batch_size must be >= 1");
  check_config(epochs >= 1, "epochs must be >= 1");
  check_config(std::isfinite(loss_weight) && loss_weight >= 0, "loss_weight (lambda) must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"optimizer", c.optimizer},         {"learning_rate", c.learning_rate}, {"momentum", c.momentum},   {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},       {"epochs", c.epochs},       {"loss_weight", c.loss_weight},
       {"seed", c.seed},                   {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  check_config(j.is_object(), "train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "optimizer") {
        check_config(value == "sgd" || value == "adam", fmt::format("optimizer must be 'sgd' or 'adam', got {}", value.dump()));
        c.optimizer = value.get<Optimizer>();
      } else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "momentum") c.momentum = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "loss_weight") c.loss_weight = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "checkpoint_every") c.checkpoint_every = value.get<std::size_t>();
      else throw ConfigError(fmt::format("unknown train config key '{}'", key));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("train config key '{}': {}", key, e.what()));
    }
  }
}

template <typename T>
LossTerms<T> loss_terms(const Tensor<T>& logits, std::span<const int> labels, const Tensor<T>& truth,
                        const Tensor<T>& estimate, double lambda) {
  check_config(std::isfinite(lambda) && lambda >= 0, fmt::format("loss weight must be >= 0, got {}", lambda));
  auto lc = ops::cross_entropy(logits, labels);
  auto lr = ops::mse(estimate, truth);
  return {ops::add(lc, ops::scale(lr, static_cast<T>(lambda))), lc, lr};
}

template LossTerms<float> loss_terms(const Tensor<float>&, std::span<const int>, const Tensor<float>&,
                                     const Tensor<float>&, double);
template LossTerms<double> loss_terms(const Tensor<double>&, std::span<const int>, const Tensor<double>&,
                                      const Tensor<double>&, double);

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t count) {
  constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = stream(seed, kShuffleStream, epoch);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

model::Checkpoint inference_checkpoint(const model::ModelConfig& config,
                                       std::vector<std::pair<std::string, Array<float>>> state,
                                       const data::NormStats& stats) {
  model::Checkpoint ckpt{config, std::move(state)};
  if (!stats.mean.empty()) {
    ckpt.put("norm.mean", stats.mean);
    ckpt.put("norm.std", stats.std);
  }
  return ckpt;
}

data::NormStats checkpoint_stats(const model::Checkpoint& ckpt) {
  const auto* mean = ckpt.find("norm.mean");
  const auto* std = ckpt.find("norm.std");
  if (mean == nullptr || std == nullptr) return {};
  check_shape(mean->shape() == std->shape(), "checkpoint normalization blobs differ in shape");
  return {*mean, *std};
}

void write_report_csv(const fs::path& path, const TrainReport& report) {
  auto out = fmt::output_file(path.string());
  out.print("{}\n", kReportHeader);
  for (const auto& e : report.epochs) {
    out.print("{},{},{},{},{},{},{},{:.3f}\n", e.epoch, e.train_loss, e.loss_c, e.loss_r, e.val_accuracy,
              e.val_nmse_db, e.lr, e.wall_time_s);
  }
}

nlohmann::json summary_json(const TrainReport& report, const TrainConfig& config, const model::ModelConfig& model) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    return v;
  };
  nlohmann::json j = {{"loss_weight", report.loss_weight},
                      {"epochs", report.epochs.size()},
                      {"steps", report.steps},
                      {"best_epoch", report.best_epoch},
                      {"best_val_accuracy", number(report.best_val_accuracy)},
                      {"wall_time_s", report.wall_time_s},
                      {"train", config},
                      {"model", model}};
  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    j["final"] = {{"train_loss", number(last.train_loss)},
                  {"loss_c", number(last.loss_c)},
                  {"loss_r", number(last.loss_r)},
                  {"val_accuracy", number(last.val_accuracy)},
                  {"val_nmse_db", number(last.val_nmse_db)}};
  }
  return j;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kHistoryColumns = 8;

using State = std::vector<std::pair<std::string, Array<float>>>;

struct Progress {
  std::size_t step = 0;
  // Sample-weighted sums over the current epoch.
  float sum_loss = 0, sum_lc = 0, sum_lr = 0, seen = 0;
  TrainReport report;
  State best_state;
};

Array<float> config_fingerprint(const TrainConfig& c, std::size_t n_train) {
  return Array<float>({8}, {float(c.optimizer), float(c.learning_rate), float(c.momentum), float(c.weight_decay), float(c.batch_size),
                            float(c.epochs), float(c.loss_weight), float(n_train)});
}

model::Checkpoint resume_checkpoint(model::RscnetModel<float>& model, const OptimizerState<float>& opt,
                                    const Progress& p, const TrainConfig& config, const data::DatasetSplit& split) {
  auto ckpt = inference_checkpoint(model.config(), model.state_dict(), split.stats);
  const auto params = model.named_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) ckpt.put("opt.velocity." + params[i].first, opt.velocity[i]);
  for (std::size_t i = 0; i < opt.second.size(); ++i) ckpt.put("opt.second." + params[i].first, opt.second[i]);
  ckpt.put("train.config", config_fingerprint(config, split.train.size()));
  // Seeds beyond 2^24 do not survive a float; split into 16-bit pieces.
  ckpt.put("train.seed", Array<float>({4}, {float(config.seed & 0xffff), float((config.seed >> 16) & 0xffff),
                                           float((config.seed >> 32) & 0xffff), float(config.seed >> 48)}));
  ckpt.put("train.step", Array<float>({1}, float(p.step)));
  ckpt.put("train.accum", Array<float>({4}, {p.sum_loss, p.sum_lc, p.sum_lr, p.seen}));
  ckpt.put("train.best", Array<float>({2}, {p.report.best_val_accuracy, float(p.report.best_epoch)}));
  if (!p.report.epochs.empty()) {
    Array<float> history({p.report.epochs.size(), kHistoryColumns});
    for (std::size_t e = 0; e < p.report.epochs.size(); ++e) {
      const auto& s = p.report.epochs[e];
      const float row[] = {float(s.epoch), s.train_loss, s.loss_c,        s.loss_r,
                           s.val_accuracy, s.val_nmse_db, s.lr, float(s.wall_time_s)};
      std::copy_n(row, kHistoryColumns, history.data() + e * kHistoryColumns);
    }
    ckpt.put("train.history", std::move(history));
  }
  for (const auto& [name, value] : p.best_state) ckpt.put("best." + name, value);
  return ckpt;
}

const Array<float>& require(const model::Checkpoint& ckpt, const std::string& name) {
  const auto* a = ckpt.find(name);
  if (a == nullptr) throw FormatError(fmt::format("resume checkpoint is missing '{}'", name));
  return *a;
}

Progress restore(model::RscnetModel<float>& model, OptimizerState<float>& opt, const model::Checkpoint& ckpt,
                 const TrainConfig& config, const data::DatasetSplit& split) {
  if (!(ckpt.config == model.config())) throw ConfigError("resume checkpoint was written for a different model config");
  if (require(ckpt, "train.config") != config_fingerprint(config, split.train.size())) {
    throw ConfigError("resume checkpoint was written with different training settings or data");
  }
  const auto& seed = require(ckpt, "train.seed");
  const std::uint64_t stored = std::uint64_t(seed[0]) | std::uint64_t(seed[1]) << 16 | std::uint64_t(seed[2]) << 32 |
                               std::uint64_t(seed[3]) << 48;
  if (stored != config.seed) throw ConfigError(fmt::format("resume checkpoint used seed {}, not {}", stored, config.seed));

  model.load_state_dict(ckpt.as_map());
  const auto params = model.named_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = require(ckpt, "opt.velocity." + params[i].first);
    check_shape(v.shape() == params[i].second.shape(), "resume checkpoint velocity shape mismatch");
    opt.velocity[i] = v;
    if (!opt.second.empty()) {
      const auto& s = require(ckpt, "opt.second." + params[i].first);
      check_shape(s.shape() == params[i].second.shape(), "resume checkpoint second-moment shape mismatch");
      opt.second[i] = s;
    }
  }
  Progress p;
  p.step = static_cast<std::size_t>(require(ckpt, "train.step")[0]);
  const auto& accum = require(ckpt, "train.accum");
  p.sum_loss = accum[0], p.sum_lc = accum[1], p.sum_lr = accum[2], p.seen = accum[3];
  const auto& best = require(ckpt, "train.best");
  p.report.best_val_accuracy = best[0];
  p.report.best_epoch = static_cast<std::size_t>(best[1]);
  if (const auto* history = ckpt.find("train.history")) {
    for (std::size_t e = 0; e < history->dim(0); ++e) {
      const float* r = history->data() + e * kHistoryColumns;
      p.report.epochs.push_back({static_cast<std::size_t>(r[0]), r[1], r[2], r[3], r[4], r[5], r[6], double(r[7])});
    }
  }
  for (const auto& [name, value] : ckpt.blobs) {
    if (name.starts_with("best.")) p.best_state.emplace_back(name.substr(5), value);
  }
  return p;
}

Tensor<float> gather(const std::vector<data::CsiSample>& samples, std::span<const std::size_t> index,
                     std::vector<int>& labels) {
  const Shape& dims = samples[index[0]].amplitude.shape();
  const std::size_t size = shape_numel(dims);
  Array<float> x({index.size(), dims[0], dims[1], dims[2]});
  labels.resize(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& s = samples[index[i]];
    check_shape(s.amplitude.shape() == dims, "train: samples differ in shape");
    std::copy_n(s.amplitude.data(), size, x.data() + i * size);
    labels[i] = s.label;
  }
  return Tensor<float>::constant(std::move(x));
}

}  // namespace

TrainResult train(model::RscnetModel<float>& model, const data::DatasetSplit& split, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  check_config(!split.train.empty(), "train: training split is empty");
  check_config(split.normalized(), "train: split must be normalized first");
  const auto& mc = model.config();
  check_config(split.dims == Shape({mc.n_antennas, mc.n_subcarriers, mc.n_timesteps}),
               fmt::format("train: data dims {} do not match the model config", shape_str(split.dims)));

  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(); };

  const std::size_t n = split.train.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total = per_epoch * config.epochs;

  auto params = model.parameters();
  OptimizerState<float> opt;
  opt.momentum = static_cast<float>(config.momentum);
  opt.weight_decay = static_cast<float>(config.weight_decay);
  opt.total_steps = total;
  opt.reset(params, config.optimizer == Optimizer::adam);

  Progress p;
  if (!options.resume.empty()) p = restore(model, opt, model::load_checkpoint(options.resume), config, split);
  opt.step_index = p.step;
  p.report.loss_weight = config.loss_weight;
  const double time_offset = p.report.epochs.empty() ? 0.0 : p.report.epochs.back().wall_time_s;

  const fs::path ckpt_dir = options.out_dir / "checkpoints";
  if (!options.out_dir.empty()) {
    fs::create_directories(ckpt_dir);
    nlohmann::json cfg = {{"train", config}, {"model", mc}};
    std::ofstream(options.out_dir / "config.json") << cfg.dump(2) << '\n';
  }
  auto save_resume = [&] {
    if (!options.out_dir.empty()) model::save_checkpoint(ckpt_dir / "last.rsck", resume_checkpoint(model, opt, p, config, split));
  };

  std::vector<std::size_t> order;
  std::size_t order_epoch = SIZE_MAX;
  std::vector<int> labels;
  bool stopped = false;

  while (p.step < total) {
    if (options.max_steps != 0 && p.step >= options.max_steps) {
      stopped = true;
      break;
    }
    const std::size_t epoch = p.step / per_epoch, batch = p.step % per_epoch;
    if (order_epoch != epoch) {
      order = epoch_order(config.seed, epoch, n);
      order_epoch = epoch;
    }
    const std::size_t begin = batch * config.batch_size, end = std::min(n, begin + config.batch_size);
    const std::span<const std::size_t> index(order.data() + begin, end - begin);

    const double lr = cosine_lr(p.step, total, config.learning_rate);
    opt.learning_rate = static_cast<float>(lr);
    try {
      auto x = gather(split.train, index, labels);
      auto out = model.forward(x, true);
      auto terms = loss_terms(out.logits, labels, x, out.reconstruction, config.loss_weight);
      terms.total.backward();
      if (config.optimizer == Optimizer::adam) adam_step<float>(opt, params);
      else sgd_step<float>(opt, params);
      const float weight = static_cast<float>(index.size());
      p.sum_loss += terms.total.item() * weight;
      p.sum_lc += terms.classification.item() * weight;
      p.sum_lr += terms.reconstruction.item() * weight;
      p.seen += weight;
    } catch (const NumericError& e) {
      throw NumericError(fmt::format("non-finite value at step {} (epoch {}, batch {}): {}", p.step, epoch + 1,
                                     batch + 1, e.what()));
    }
    ++p.step;
    opt.step_index = p.step;

    if (p.step % per_epoch == 0) {
      EpochStats stats;
      stats.epoch = epoch + 1;
      stats.train_loss = p.sum_loss / p.seen;
      stats.loss_c = p.sum_lc / p.seen;
      stats.loss_r = p.sum_lr / p.seen;
      stats.lr = static_cast<float>(lr);
      stats.val_accuracy = stats.val_nmse_db = std::numeric_limits<float>::quiet_NaN();
      bool improved = split.val.empty();
      if (!split.val.empty()) {
        const auto r = eval::evaluate(model, split.val);
        stats.val_accuracy = static_cast<float>(r.accuracy);
        stats.val_nmse_db = static_cast<float>(r.nmse_db);
        improved = stats.val_accuracy > p.report.best_val_accuracy;
      }
      stats.wall_time_s = time_offset + elapsed();
      p.sum_loss = p.sum_lc = p.sum_lr = p.seen = 0;
      p.report.epochs.push_back(stats);
      if (improved) {
        p.report.best_val_accuracy = stats.val_accuracy;
        p.report.best_epoch = stats.epoch;
        p.best_state = model.state_dict();
        if (!options.out_dir.empty()) {
          model::save_checkpoint(ckpt_dir / "best.rsck", inference_checkpoint(mc, p.best_state, split.stats));
        }
      }
      if (options.on_epoch) options.on_epoch(stats);
      save_resume();
      if (!options.out_dir.empty()) write_report_csv(options.out_dir / "report.csv", p.report);
    } else if (config.checkpoint_every != 0 && p.step % config.checkpoint_every == 0) {
      save_resume();
    }
  }
  if (stopped) save_resume();

  p.report.steps = p.step;
  p.report.wall_time_s = time_offset + elapsed();
  if (!options.out_dir.empty() && !stopped) {
    write_report_csv(options.out_dir / "report.csv", p.report);
    std::ofstream(options.out_dir / "summary.json") << summary_json(p.report, config, mc).dump(2) << '\n';
  }
  return {std::move(p.report), std::move(p.best_state), !stopped};
}

}  // namespace rscnet::train
