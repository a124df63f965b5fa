#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rscnet/data/dataset.hpp"
#include "rscnet/model/flops.hpp"
#include "rscnet/model/rscnet.hpp"

namespace rscnet::eval {

// 10*log10 of the mean over samples of ||H - H^||^2 / ||H||^2. Returns -inf
// when every reconstruction is exact. Throws if some ||H|| is zero.
double nmse_db(std::span<const Array<float>> truth, std::span<const Array<float>> estimate);
// 10*log10(sum ||H - H^||^2 / sum ||H||^2), reported alongside.
double nmse_db_pooled(std::span<const Array<float>> truth, std::span<const Array<float>> estimate);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const float> logits);
// logits: [N, C].
double accuracy(const Array<float>& logits, std::span<const int> labels);

struct EvalResult {
  std::size_t count = 0;
  double accuracy = 0.0;
  double nmse_db = 0.0;         // normalized (training-space) values
  double nmse_db_pooled = 0.0;  // ratio of sums, normalized values
  double nmse_db_raw = 0.0;     // after undoing the normalization; NaN without statistics
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  model::FlopsBreakdown flops;
  model::ModelConfig config;
};

struct Outputs {
  Array<float> logits;                       // [N, C]
  std::vector<Array<float>> reconstructions;  // each [N_a, N_s, N_t]
};

// Eval-mode forward over `samples` in chunks of `batch`.
Outputs predict(const model::RscnetModel<float>& model, const std::vector<data::CsiSample>& samples,
                std::size_t batch = 32);

// `stats` may be null; then nmse_db_raw is NaN.
EvalResult evaluate(const model::RscnetModel<float>& model, const std::vector<data::CsiSample>& samples,
                    const data::NormStats* stats = nullptr, std::size_t batch = 32);

nlohmann::json to_json(const EvalResult& r);

// Writes <dir>/{raw,compressed,recurrent,classifier}.csv. Rows are
// "stage,sample_id,label,v0,v1,...", one per sample.
inline constexpr const char* kEmbeddingStages[] = {"raw", "compressed", "recurrent", "classifier"};
void export_embeddings(const model::RscnetModel<float>& model, const std::vector<data::CsiSample>& samples,
                       const std::filesystem::path& dir, std::size_t batch = 32);

}  // namespace rscnet::eval
