#include "rscnet/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "rscnet/bytes.hpp"

namespace rscnet::model {

namespace {
constexpr char kMagic[4] = {'R', 'S', 'C', 'K'};
}

const Array<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, a] : blobs) {
    if (n == name) return &a;
  }
  return nullptr;
}

std::map<std::string, Array<float>> Checkpoint::as_map() const { return {blobs.begin(), blobs.end()}; }

void Checkpoint::put(std::string name, Array<float> value) {
  for (auto& [n, a] : blobs) {
    if (n == name) {
      a = std::move(value);
      return;
    }
  }
  blobs.emplace_back(std::move(name), std::move(value));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  bytes::put_le(out, kCheckpointVersion);
  const auto cfg = encode_config(ckpt.config);
  bytes::put_le(out, static_cast<std::uint32_t>(cfg.size()));
  out.insert(out.end(), cfg.begin(), cfg.end());
  bytes::put_le(out, static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& [name, a] : ckpt.blobs) {
    bytes::put_le(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    bytes::put_le(out, static_cast<std::uint32_t>(a.rank()));
    for (auto e : a.shape()) bytes::put_le(out, static_cast<std::uint32_t>(e));
    for (float v : a.values()) bytes::put_f32_le(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> data) {
  bytes::Reader r(data.data(), data.size());
  if (data.size() < 4 || std::memcmp(r.take(4), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic (expected RSCK)");
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(fmt::format("checkpoint: unsupported format version {} (expected {})", version, kCheckpointVersion));
  }
  Checkpoint ckpt;
  const auto cfg_len = r.le<std::uint32_t>();
  const std::uint8_t* cfg = r.take(cfg_len);
  std::size_t used = 0;
  ckpt.config = decode_config(cfg, cfg_len, &used);
  if (used != cfg_len) throw FormatError("checkpoint: config block has trailing bytes");
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.le<std::uint32_t>();
    const auto* name = reinterpret_cast<const char*>(r.take(name_len));
    const auto rank = r.le<std::uint32_t>();
    if (rank == 0 || rank > 8) throw FormatError(fmt::format("checkpoint: implausible rank {}", rank));
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
      e = r.le<std::uint32_t>();
      if (e == 0) throw FormatError("checkpoint: zero extent");
      numel *= e;
    }
    if (numel > r.remaining() / 4) throw FormatError("checkpoint: blob extends past end of file");
    std::vector<float> values(numel);
    for (auto& v : values) v = r.f32();
    ckpt.blobs.emplace_back(std::string(name, name_len), Array<float>(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes after last blob");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto data = encode_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write checkpoint {}", tmp.string()));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(fmt::format("short write to {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open checkpoint {}", path.string()));
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(data);
}

}  // namespace rscnet::model
