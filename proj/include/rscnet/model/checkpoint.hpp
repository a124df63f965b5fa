#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rscnet/model/config.hpp"
#include "rscnet/numerics/array.hpp"

namespace rscnet::model {

// On-disk layout (all integers little-endian):
//
//   "RSCK"                         4 bytes
//   format version                 u32 (kCheckpointVersion)
//   config length, config bytes    u32 + encode_config()
//   blob count                     u32
//   per blob: name length u32, name bytes, rank u32, extents u32 x rank,
//             values as f32 x product(extents)
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, Array<float>>> blobs;

  const Array<float>* find(const std::string& name) const;
  std::map<std::string, Array<float>> as_map() const;
  void put(std::string name, Array<float> value);
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> data);

// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rscnet::model
