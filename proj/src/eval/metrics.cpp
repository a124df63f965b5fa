#include "rscnet/eval/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/os.h>

namespace rscnet::eval {

namespace {

struct ErrorTerms {
  double error = 0.0;
  double energy = 0.0;
};

ErrorTerms error_terms(const Array<float>& truth, const Array<float>& estimate, std::size_t index) {
  check_shape(truth.shape() == estimate.shape(),
              fmt::format("nmse: sample {} has shapes {} and {}", index, shape_str(truth.shape()),
                          shape_str(estimate.shape())));
  ErrorTerms t;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = double(truth[i]) - double(estimate[i]);
    t.error += d * d;
    t.energy += double(truth[i]) * double(truth[i]);
  }
  if (t.energy == 0.0) throw NumericError(fmt::format("nmse: sample {} has zero energy", index));
  return t;
}

void check_sets(std::span<const Array<float>> truth, std::span<const Array<float>> estimate) {
  check_shape(truth.size() == estimate.size(),
              fmt::format("nmse: {} reference samples but {} estimates", truth.size(), estimate.size()));
  check_shape(!truth.empty(), "nmse: no samples");
}

double to_db(double ratio) {
  return ratio == 0.0 ? -std::numeric_limits<double>::infinity() : 10.0 * std::log10(ratio);
}

}  // namespace

double nmse_db(std::span<const Array<float>> truth, std::span<const Array<float>> estimate) {
  check_sets(truth, estimate);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = error_terms(truth[i], estimate[i], i);
    sum += t.error / t.energy;
  }
  return to_db(sum / double(truth.size()));
}

double nmse_db_pooled(std::span<const Array<float>> truth, std::span<const Array<float>> estimate) {
  check_sets(truth, estimate);
  double error = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = error_terms(truth[i], estimate[i], i);
    error += t.error;
    energy += t.energy;
  }
  return to_db(error / energy);
}

std::size_t argmax(std::span<const float> logits) {
  check_shape(!logits.empty(), "argmax: empty logits");
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

double accuracy(const Array<float>& logits, std::span<const int> labels) {
  check_shape(logits.rank() == 2 && logits.dim(0) == labels.size() && !labels.empty(),
              fmt::format("accuracy: logits {} for {} labels", shape_str(logits.shape()), labels.size()));
  const std::size_t c = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += static_cast<int>(argmax(logits.values().subspan(i * c, c))) == labels[i];
  }
  return double(correct) / double(labels.size());
}

// ---------------------------------------------------------------------------

namespace {

Tensor<float> stack(const std::vector<data::CsiSample>& samples, std::size_t begin, std::size_t end) {
  const Shape& dims = samples[begin].amplitude.shape();
  const std::size_t size = shape_numel(dims);
  Array<float> x({end - begin, dims[0], dims[1], dims[2]});
  for (std::size_t i = begin; i < end; ++i) {
    check_shape(samples[i].amplitude.shape() == dims, "evaluate: samples differ in shape");
    std::copy_n(samples[i].amplitude.data(), size, x.data() + (i - begin) * size);
  }
  return Tensor<float>::constant(std::move(x));
}

}  // namespace

Outputs predict(const model::RscnetModel<float>& model, const std::vector<data::CsiSample>& samples,
                std::size_t batch) {
  check_shape(!samples.empty(), "predict: no samples");
  batch = std::max<std::size_t>(batch, 1);
  const std::size_t n = samples.size(), c = model.config().n_classes;
  Outputs out{Array<float>({n, c}), {}};
  out.reconstructions.reserve(n);
  for (std::size_t begin = 0; begin < n; begin += batch) {
    const std::size_t end = std::min(n, begin + batch);
    auto result = model.forward(stack(samples, begin, end), false);
    std::copy_n(result.logits.value().data(), (end - begin) * c, out.logits.data() + begin * c);
    const auto& rec = result.reconstruction.value();
    const Shape dims(rec.shape().begin() + 1, rec.shape().end());
    const std::size_t size = shape_numel(dims);
    for (std::size_t i = 0; i < end - begin; ++i) {
      out.reconstructions.emplace_back(dims, std::vector<float>(rec.data() + i * size, rec.data() + (i + 1) * size));
    }
  }
  return out;
}

EvalResult evaluate(const model::RscnetModel<float>& model, const std::vector<data::CsiSample>& samples,
                    const data::NormStats* stats, std::size_t batch) {
  const auto out = predict(model, samples, batch);
  const std::size_t c = model.config().n_classes;
  EvalResult r;
  r.count = samples.size();
  r.config = model.config();
  r.flops = model::flops_count(model.config());

  std::vector<int> labels;
  std::vector<Array<float>> truth;
  for (const auto& s : samples) {
    labels.push_back(s.label);
    truth.push_back(s.amplitude);
  }
  r.accuracy = accuracy(out.logits, labels);
  r.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    check_shape(labels[i] >= 0 && std::size_t(labels[i]) < c, fmt::format("evaluate: label {} out of range", labels[i]));
    ++r.confusion[std::size_t(labels[i])][argmax(out.logits.values().subspan(i * c, c))];
  }
  r.nmse_db = nmse_db(truth, out.reconstructions);
  r.nmse_db_pooled = nmse_db_pooled(truth, out.reconstructions);
  r.nmse_db_raw = std::numeric_limits<double>::quiet_NaN();
  if (stats != nullptr && !stats->mean.empty()) {
    std::vector<Array<float>> raw_truth, raw_estimate;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      raw_truth.push_back(data::denormalize(truth[i], *stats));
      raw_estimate.push_back(data::denormalize(out.reconstructions[i], *stats));
    }
    r.nmse_db_raw = nmse_db(raw_truth, raw_estimate);
  }
  return r;
}

nlohmann::json to_json(const EvalResult& r) {
  auto db = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    return v;
  };
  return {{"count", r.count},
          {"accuracy", r.accuracy},
          {"nmse_db", db(r.nmse_db)},
          {"nmse_db_pooled", db(r.nmse_db_pooled)},
          {"nmse_db_raw", db(r.nmse_db_raw)},
          {"confusion", r.confusion},
          {"flops",
           {{"encoder", r.flops.encoder},
            {"recurrent", r.flops.recurrent},
            {"decoder", r.flops.decoder},
            {"classifier", r.flops.classifier},
            {"per_sample", r.flops.per_sample()}}},
          {"config", r.config}};
}

// ---------------------------------------------------------------------------

void export_embeddings(const model::RscnetModel<float>& model, const std::vector<data::CsiSample>& samples,
                       const std::filesystem::path& dir, std::size_t batch) {
  check_shape(!samples.empty(), "export_embeddings: no samples");
  std::filesystem::create_directories(dir);
  std::vector<fmt::ostream> files;
  for (const char* stage : kEmbeddingStages) {
    files.push_back(fmt::output_file((dir / (std::string(stage) + ".csv")).string()));
  }
  auto header = [&](std::size_t k, std::size_t width) {
    files[k].print("stage,sample_id,label");
    for (std::size_t i = 0; i < width; ++i) files[k].print(",v{}", i);
    files[k].print("\n");
  };
  auto row = [&](std::size_t k, std::size_t id, int label, const float* v, std::size_t width) {
    files[k].print("{},{},{}", kEmbeddingStages[k], id, label);
    for (std::size_t i = 0; i < width; ++i) files[k].print(",{}", v[i]);
    files[k].print("\n");
  };

  batch = std::max<std::size_t>(batch, 1);
  for (std::size_t begin = 0; begin < samples.size(); begin += batch) {
    const std::size_t end = std::min(samples.size(), begin + batch);
    auto x = stack(samples, begin, end);
    auto out = model.forward(x, false);
    const Tensor<float>* stages[] = {&x, &out.compressed, &out.hidden, &out.penultimate};
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t width = stages[k]->numel() / (end - begin);
      if (begin == 0) header(k, width);
      for (std::size_t i = begin; i < end; ++i) {
        row(k, i, samples[i].label, stages[k]->value().data() + (i - begin) * width, width);
      }
    }
  }
}

}  // namespace rscnet::eval
