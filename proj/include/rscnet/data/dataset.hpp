#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rscnet/numerics/array.hpp"

namespace rscnet::data {

inline constexpr std::array<std::string_view, 7> kActivityNames{"lie down", "fall",     "walk",      "run",
                                                                 "sit down", "stand up", "empty room"};

// One activity recording: linear amplitudes [N_a, N_s, N_t] and a class id.
struct CsiSample {
  Array<float> amplitude;
  int label = 0;
};

// Per-(antenna, subcarrier) z-score statistics, each [N_a, N_s].
struct NormStats {
  Array<float> mean;
  Array<float> std;
};

struct DatasetSplit {
  std::vector<CsiSample> train;
  std::vector<CsiSample> val;
  std::vector<CsiSample> test;
  Shape dims{3, 30, 250};
  std::vector<std::string> classes{kActivityNames.begin(), kActivityNames.end()};
  NormStats stats;  // empty until normalize()

  bool normalized() const { return !stats.mean.empty(); }
};

// Window s holds frames [s*N_f, (s+1)*N_f). N_f must divide N_t.
template <typename T>
std::vector<Array<T>> segment_windows(const Array<T>& h, std::size_t frames_per_window);
// Inverse of segment_windows. Windows must share one [N_a, N_s, N_f] shape.
template <typename T>
Array<T> merge_windows(const std::vector<Array<T>>& windows);

inline constexpr float kMinStd = 1e-8f;

// Statistics over every frame of every sample; std is the population value,
// clamped below at kMinStd.
NormStats compute_stats(const std::vector<CsiSample>& samples);
Array<float> normalize(const Array<float>& amplitude, const NormStats& stats);
Array<float> denormalize(const Array<float>& normalized, const NormStats& stats);
// z-scores all three splits with statistics from the training split.
DatasetSplit normalize(DatasetSplit split);

// Manifest (JSON):
//   {"dims": [N_a, N_s, N_t], "classes": [...],
//    "splits": {"train": {"data": "train.f32", "labels": "train.u8", "count": n}, ...}}
// Data files are row-major f32 little-endian, one sample after another; label
// files hold one byte per sample. Paths are relative to the manifest.
DatasetSplit load_dataset(const std::filesystem::path& manifest);
// Writes manifest.json plus one data and one label file per split into `dir`.
// Returns the manifest path.
std::filesystem::path save_dataset(const DatasetSplit& split, const std::filesystem::path& dir);

}  // namespace rscnet::data
