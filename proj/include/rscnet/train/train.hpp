#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rscnet/data/dataset.hpp"
#include "rscnet/model/checkpoint.hpp"
#include "rscnet/model/rscnet.hpp"

namespace rscnet::train {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::sgd;
  double learning_rate = 0.01;
  double momentum = 0.9;  // beta1 under Adam
  // Printed as 1.5 x 10^6 in the source, which diverges on the first step.
  double weight_decay = 1.5e-6;
  std::size_t batch_size = 512;
  std::size_t epochs = 300;
  double loss_weight = 50.0;  // lambda
  std::uint64_t seed = 0;
  // Optimizer steps between resume checkpoints; 0 writes one per epoch only.
  std::size_t checkpoint_every = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

NLOHMANN_JSON_SERIALIZE_ENUM(Optimizer, {{Optimizer::sgd, "sgd"}, {Optimizer::adam, "adam"}})

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

template <typename T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> classification;
  Tensor<T> reconstruction;
};

// cross_entropy(logits, labels) + lambda * mse(estimate, truth)
template <typename T>
LossTerms<T> loss_terms(const Tensor<T>& logits, std::span<const int> labels, const Tensor<T>& truth,
                        const Tensor<T>& estimate, double lambda);
template <typename T>
Tensor<T> total_loss(const Tensor<T>& logits, std::span<const int> labels, const Tensor<T>& truth,
                     const Tensor<T>& estimate, double lambda) {
  return loss_terms(logits, labels, truth, estimate, lambda).total;
}

// Values are stored at 32 bits so that a resumed run reproduces the history
// it reloads; wall time is the exception and is not reproducible anyway.
struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  float train_loss = 0;   // sample-weighted mean over the epoch
  float loss_c = 0;
  float loss_r = 0;
  float val_accuracy = 0;  // NaN without a validation split
  float val_nmse_db = 0;
  float lr = 0;  // at the epoch's last step
  double wall_time_s = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double loss_weight = 0;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;  // 0 until an epoch has been validated
  float best_val_accuracy = -1;
  double wall_time_s = 0;
};

inline constexpr const char* kReportHeader = "epoch,train_loss,loss_c,loss_r,val_accuracy,val_nmse_db,lr,wall_time_s";

struct TrainOptions {
  // Receives checkpoints/{last,best}.rsck, report.csv, summary.json and
  // config.json. Empty keeps everything in memory.
  std::filesystem::path out_dir;
  // Resume checkpoint (a checkpoints/last.rsck) to continue from.
  std::filesystem::path resume;
  // Stop once this many optimizer steps have run in total, after writing a
  // resume checkpoint. 0 runs to the end.
  std::size_t max_steps = 0;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  TrainReport report;
  // Parameters and buffers of the epoch with the best validation accuracy
  // (the final state when there is no validation split).
  std::vector<std::pair<std::string, Array<float>>> best_state;
  bool completed = false;
};

// SGD with momentum, or Adam, over shuffled mini-batches of a normalized
// split. The last partial batch is kept. Learning rate follows cosine_lr over
// every step of the run. Deterministic for a given config.seed.
TrainResult train(model::RscnetModel<float>& model, const data::DatasetSplit& split, const TrainConfig& config,
                  const TrainOptions& options = {});

// Inference checkpoint: model state plus the normalization statistics as
// "norm.mean" / "norm.std".
model::Checkpoint inference_checkpoint(const model::ModelConfig& config,
                                       std::vector<std::pair<std::string, Array<float>>> state,
                                       const data::NormStats& stats);
// Reads the statistics back; empty when the checkpoint has none.
data::NormStats checkpoint_stats(const model::Checkpoint& ckpt);

void write_report_csv(const std::filesystem::path& path, const TrainReport& report);
nlohmann::json summary_json(const TrainReport& report, const TrainConfig& config, const model::ModelConfig& model);

// Index permutation for one epoch; a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t count);

}  // namespace rscnet::train
