#include "rscnet/model/config.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "rscnet/bytes.hpp"
#include "rscnet/error.hpp"

namespace rscnet::model {

std::size_t ModelConfig::compressed_dim() const {
  const double m = std::round(static_cast<double>(window_size()) * compression_ratio);
  return m < 1.0 ? 1 : static_cast<std::size_t>(m);
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    check_config(v >= 1, fmt::format("{} must be >= 1, got {}", key, v));
  };
  positive(n_antennas, "n_antennas");
  positive(n_subcarriers, "n_subcarriers");
  positive(n_timesteps, "n_timesteps");
  positive(window_frames, "window_frames");
  positive(expansion_rate, "expansion_rate");
  positive(encoder_width, "encoder_width");
  check_config(n_classes >= 2, fmt::format("n_classes must be >= 2, got {}", n_classes));
  check_config(window_frames <= n_timesteps && n_timesteps % window_frames == 0,
               fmt::format("window_frames: {} does not divide n_timesteps {}", window_frames, n_timesteps));
  const double lo = 1.0 / static_cast<double>(window_size());
  check_config(std::isfinite(compression_ratio) && compression_ratio >= lo * (1.0 - 1e-12) && compression_ratio <= 1.0,
               fmt::format("compression_ratio: {} outside [1/{}, 1]", compression_ratio, window_size()));
  check_config(std::isfinite(loss_weight) && loss_weight >= 0.0,
               fmt::format("loss_weight must be finite and >= 0, got {}", loss_weight));
  for (auto h : classifier_hidden) positive(h, "classifier_hidden");
}

std::uint32_t ModelConfig::hash() const {
  std::uint32_t h = 2166136261u;
  for (auto b : encode_config(*this)) {
    h ^= b;
    h *= 16777619u;
  }
  return h;
}

double parse_ratio(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto slash = text.find('/');
    double value;
    if (slash == std::string::npos) {
      value = std::stod(text, &used);
      if (used != text.size()) throw ConfigError("trailing characters");
    } else {
      const std::string num = text.substr(0, slash), den = text.substr(slash + 1);
      const double n = std::stod(num, &used);
      if (used != num.size()) throw ConfigError("trailing characters");
      const double d = std::stod(den, &used);
      if (used != den.size() || d == 0.0) throw ConfigError("bad denominator");
      value = n / d;
    }
    return value;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("cannot parse ratio '{}'", text));
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_antennas", c.n_antennas},
                     {"n_subcarriers", c.n_subcarriers},
                     {"n_timesteps", c.n_timesteps},
                     {"window_frames", c.window_frames},
                     {"compression_ratio", c.compression_ratio},
                     {"expansion_rate", c.expansion_rate},
                     {"lstm_hidden", c.lstm_hidden},
                     {"n_classes", c.n_classes},
                     {"loss_weight", c.loss_weight},
                     {"encoder_width", c.encoder_width},
                     {"classifier_hidden", c.classifier_hidden}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const std::set<std::string> known{"n_antennas",    "n_subcarriers", "n_timesteps",   "window_frames",
                                           "compression_ratio", "expansion_rate", "lstm_hidden", "n_classes",
                                           "loss_weight",   "encoder_width", "classifier_hidden"};
  check_config(j.is_object(), "model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    check_config(known.count(key) == 1, fmt::format("unknown model config key '{}'", key));
    try {
      if (key == "compression_ratio") {
        c.compression_ratio = value.is_string() ? parse_ratio(value.get<std::string>()) : value.get<double>();
      } else if (key == "loss_weight") {
        c.loss_weight = value.get<double>();
      } else if (key == "classifier_hidden") {
        c.classifier_hidden = value.get<std::vector<std::size_t>>();
      } else {
        const auto v = value.get<std::int64_t>();
        check_config(v >= 0, "negative");
        const auto u = static_cast<std::size_t>(v);
        if (key == "n_antennas") c.n_antennas = u;
        if (key == "n_subcarriers") c.n_subcarriers = u;
        if (key == "n_timesteps") c.n_timesteps = u;
        if (key == "window_frames") c.window_frames = u;
        if (key == "expansion_rate") c.expansion_rate = u;
        if (key == "lstm_hidden") c.lstm_hidden = u;
        if (key == "n_classes") c.n_classes = u;
        if (key == "encoder_width") c.encoder_width = u;
      }
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("invalid value for '{}': {}", key, e.what()));
    }
  }
}

std::vector<std::uint8_t> encode_config(const ModelConfig& c) {
  std::vector<std::uint8_t> out;
  for (std::size_t v : {c.n_antennas, c.n_subcarriers, c.n_timesteps, c.window_frames, c.expansion_rate,
                        c.lstm_hidden, c.n_classes, c.encoder_width}) {
    bytes::put_le(out, static_cast<std::uint32_t>(v));
  }
  bytes::put_f64_le(out, c.compression_ratio);
  bytes::put_f64_le(out, c.loss_weight);
  bytes::put_le(out, static_cast<std::uint32_t>(c.classifier_hidden.size()));
  for (auto h : c.classifier_hidden) bytes::put_le(out, static_cast<std::uint32_t>(h));
  return out;
}

ModelConfig decode_config(const std::uint8_t* data, std::size_t size, std::size_t* consumed) {
  bytes::Reader r(data, size);
  ModelConfig c;
  c.n_antennas = r.le<std::uint32_t>();
  c.n_subcarriers = r.le<std::uint32_t>();
  c.n_timesteps = r.le<std::uint32_t>();
  c.window_frames = r.le<std::uint32_t>();
  c.expansion_rate = r.le<std::uint32_t>();
  c.lstm_hidden = r.le<std::uint32_t>();
  c.n_classes = r.le<std::uint32_t>();
  c.encoder_width = r.le<std::uint32_t>();
  c.compression_ratio = r.f64();
  c.loss_weight = r.f64();
  const auto layers = r.le<std::uint32_t>();
  if (layers > 64) throw FormatError(fmt::format("implausible classifier depth {}", layers));
  c.classifier_hidden.resize(layers);
  for (auto& h : c.classifier_hidden) h = r.le<std::uint32_t>();
  if (consumed != nullptr) *consumed = r.position();
  return c;
}

}  // namespace rscnet::model
