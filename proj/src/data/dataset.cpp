#include "rscnet/data/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "rscnet/bytes.hpp"

namespace rscnet::data {

namespace fs = std::filesystem;

template <typename T>
std::vector<Array<T>> segment_windows(const Array<T>& h, std::size_t frames_per_window) {
  check_shape(h.rank() == 3, fmt::format("segment_windows: expected [N_a, N_s, N_t], got {}", shape_str(h.shape())));
  const std::size_t rows = h.dim(0) * h.dim(1), nt = h.dim(2), nf = frames_per_window;
  if (nf == 0 || nt % nf != 0) {
    throw ConfigError(fmt::format("segment_windows: {} frames per window does not divide {} frames", nf, nt));
  }
  std::vector<Array<T>> out;
  for (std::size_t s = 0; s < nt / nf; ++s) {
    Array<T> w({h.dim(0), h.dim(1), nf});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(h.data() + r * nt + s * nf, nf, w.data() + r * nf);
    }
    out.push_back(std::move(w));
  }
  return out;
}

template <typename T>
Array<T> merge_windows(const std::vector<Array<T>>& windows) {
  check_shape(!windows.empty(), "merge_windows: no windows");
  const Shape& shape = windows.front().shape();
  check_shape(shape.size() == 3, "merge_windows: windows must be [N_a, N_s, N_f]");
  for (const auto& w : windows) {
    check_shape(w.shape() == shape, fmt::format("merge_windows: window {} differs from {}", shape_str(w.shape()),
                                                shape_str(shape)));
  }
  const std::size_t rows = shape[0] * shape[1], nf = shape[2], nt = nf * windows.size();
  Array<T> h({shape[0], shape[1], nt});
  for (std::size_t s = 0; s < windows.size(); ++s) {
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(windows[s].data() + r * nf, nf, h.data() + r * nt + s * nf);
  }
  return h;
}

template std::vector<Array<float>> segment_windows(const Array<float>&, std::size_t);
template std::vector<Array<double>> segment_windows(const Array<double>&, std::size_t);
template Array<float> merge_windows(const std::vector<Array<float>>&);
template Array<double> merge_windows(const std::vector<Array<double>>&);

NormStats compute_stats(const std::vector<CsiSample>& samples) {
  check_config(!samples.empty(), "normalize: training split is empty");
  const Shape& dims = samples.front().amplitude.shape();
  const std::size_t rows = dims[0] * dims[1], nt = dims[2];
  const double count = static_cast<double>(samples.size() * nt);
  std::vector<double> sum(rows, 0.0), sq(rows, 0.0);
  for (const auto& s : samples) {
    check_shape(s.amplitude.shape() == dims, "normalize: samples differ in shape");
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < nt; ++t) sum[r] += s.amplitude[r * nt + t];
    }
  }
  for (std::size_t r = 0; r < rows; ++r) sum[r] /= count;
  for (const auto& s : samples) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < nt; ++t) {
        const double d = s.amplitude[r * nt + t] - sum[r];
        sq[r] += d * d;
      }
    }
  }
  NormStats stats{Array<float>({dims[0], dims[1]}), Array<float>({dims[0], dims[1]})};
  for (std::size_t r = 0; r < rows; ++r) {
    stats.mean[r] = static_cast<float>(sum[r]);
    stats.std[r] = std::max(kMinStd, static_cast<float>(std::sqrt(sq[r] / count)));
  }
  return stats;
}

Array<float> normalize(const Array<float>& amplitude, const NormStats& stats) {
  check_shape(amplitude.rank() == 3 && amplitude.dim(0) * amplitude.dim(1) == stats.mean.size(),
              "normalize: sample does not match statistics");
  const std::size_t nt = amplitude.dim(2);
  Array<float> out(amplitude.shape());
  for (std::size_t r = 0; r < stats.mean.size(); ++r) {
    for (std::size_t t = 0; t < nt; ++t) out[r * nt + t] = (amplitude[r * nt + t] - stats.mean[r]) / stats.std[r];
  }
  return out;
}

Array<float> denormalize(const Array<float>& normalized, const NormStats& stats) {
  check_shape(normalized.rank() == 3 && normalized.dim(0) * normalized.dim(1) == stats.mean.size(),
              "denormalize: sample does not match statistics");
  const std::size_t nt = normalized.dim(2);
  Array<float> out(normalized.shape());
  for (std::size_t r = 0; r < stats.mean.size(); ++r) {
    for (std::size_t t = 0; t < nt; ++t) out[r * nt + t] = normalized[r * nt + t] * stats.std[r] + stats.mean[r];
  }
  return out;
}

DatasetSplit normalize(DatasetSplit split) {
  check_config(!split.normalized(), "normalize: split is already normalized");
  split.stats = compute_stats(split.train);
  for (auto* part : {&split.train, &split.val, &split.test}) {
    for (auto& s : *part) s.amplitude = normalize(s.amplitude, split.stats);
  }
  return split;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kSplitNames[] = {"train", "val", "test"};

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
}

std::vector<CsiSample>& part(DatasetSplit& s, std::size_t i) { return i == 0 ? s.train : i == 1 ? s.val : s.test; }
const std::vector<CsiSample>& part(const DatasetSplit& s, std::size_t i) {
  return i == 0 ? s.train : i == 1 ? s.val : s.test;
}

}  // namespace

DatasetSplit load_dataset(const fs::path& manifest) {
  nlohmann::json j;
  try {
    std::ifstream in(manifest);
    if (!in) throw Error(fmt::format("cannot open manifest {}", manifest.string()));
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("manifest {}: {}", manifest.string(), e.what()));
  }
  DatasetSplit split;
  try {
    split.dims = j.at("dims").get<Shape>();
    split.classes = j.at("classes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("manifest {}: {}", manifest.string(), e.what()));
  }
  if (split.dims.size() != 3 || shape_numel(split.dims) == 0) throw FormatError("manifest: dims must be [N_a, N_s, N_t]");
  if (split.classes.empty() || split.classes.size() > 256) throw FormatError("manifest: need 1..256 class names");
  const std::size_t sample = shape_numel(split.dims);
  const fs::path base = manifest.parent_path();

  for (std::size_t i = 0; i < 3; ++i) {
    if (!j.at("splits").contains(kSplitNames[i])) continue;
    const auto& entry = j["splits"][kSplitNames[i]];
    const auto count = entry.at("count").get<std::size_t>();
    const auto data = read_file(base / entry.at("data").get<std::string>());
    const auto labels = read_file(base / entry.at("labels").get<std::string>());
    const std::size_t expected = count * sample * 4;
    if (data.size() != expected) {
      throw FormatError(fmt::format("{} data: expected {} bytes ({} samples of {}), found {}", kSplitNames[i],
                                    expected, count, shape_str(split.dims), data.size()));
    }
    if (labels.size() != count) {
      throw FormatError(fmt::format("{} labels: expected {} bytes, found {}", kSplitNames[i], count, labels.size()));
    }
    auto& out = part(split, i);
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
      if (labels[n] >= split.classes.size()) {
        throw FormatError(fmt::format("{} sample {}: unknown label id {} ({} classes)", kSplitNames[i], n, labels[n],
                                      split.classes.size()));
      }
      std::vector<float> values(sample);
      for (std::size_t k = 0; k < sample; ++k) values[k] = bytes::get_f32_le(data.data() + (n * sample + k) * 4);
      out.push_back({Array<float>(split.dims, std::move(values)), labels[n]});
    }
  }
  return split;
}

fs::path save_dataset(const DatasetSplit& split, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json j;
  j["dims"] = split.dims;
  j["classes"] = split.classes;
  j["splits"] = nlohmann::json::object();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& samples = part(split, i);
    std::vector<std::uint8_t> data, labels;
    data.reserve(samples.size() * shape_numel(split.dims) * 4);
    for (const auto& s : samples) {
      check_shape(s.amplitude.shape() == split.dims, "save_dataset: sample shape differs from dims");
      for (float v : s.amplitude.values()) bytes::put_f32_le(data, v);
      labels.push_back(static_cast<std::uint8_t>(s.label));
    }
    const std::string name = kSplitNames[i];
    write_file(dir / (name + ".f32"), data);
    write_file(dir / (name + ".u8"), labels);
    j["splits"][name] = {{"data", name + ".f32"}, {"labels", name + ".u8"}, {"count", samples.size()}};
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream(manifest) << j.dump(2) << '\n';
  return manifest;
}

}  // namespace rscnet::data
