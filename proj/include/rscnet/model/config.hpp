#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rscnet::model {

// Every architectural hyperparameter in one record.
//
// Shapes: a sample is n_antennas x n_subcarriers x n_timesteps; it is cut
// into window_count() windows of window_frames frames, each compressed to
// compressed_dim() values.
struct ModelConfig {
  std::size_t n_antennas = 3;
  std::size_t n_subcarriers = 30;
  std::size_t n_timesteps = 250;
  std::size_t window_frames = 50;
  double compression_ratio = 1.0 / 90.0;
  std::size_t expansion_rate = 1;
  std::size_t lstm_hidden = 0;  // 0 means "same as compressed_dim()"
  std::size_t n_classes = 7;
  double loss_weight = 50.0;
  std::size_t encoder_width = 8;
  std::vector<std::size_t> classifier_hidden{512, 128};

  // Throws ConfigError naming the offending field.
  void validate() const;

  std::size_t window_size() const { return n_antennas * n_subcarriers * window_frames; }
  std::size_t sample_size() const { return n_antennas * n_subcarriers * n_timesteps; }
  std::size_t window_count() const { return n_timesteps / window_frames; }
  // M = max(1, round(N_a * N_s * N_f * eta))
  std::size_t compressed_dim() const;
  std::size_t hidden_dim() const { return lstm_hidden == 0 ? compressed_dim() : lstm_hidden; }
  std::size_t decoder_width() const { return 3 * expansion_rate; }
  std::size_t embedding_dim() const { return hidden_dim() * window_count(); }

  // FNV-1a over the canonical binary encoding.
  std::uint32_t hash() const;

  bool operator==(const ModelConfig&) const = default;
};

// Parses "1/90", "0.0111" or "1".
double parse_ratio(const std::string& text);

void to_json(nlohmann::json& j, const ModelConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ModelConfig& c);

// Canonical little-endian encoding used in checkpoints.
std::vector<std::uint8_t> encode_config(const ModelConfig& c);
ModelConfig decode_config(const std::uint8_t* data, std::size_t size, std::size_t* consumed = nullptr);

}  // namespace rscnet::model
