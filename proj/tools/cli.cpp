#include "cli.hpp"

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rscnet/bytes.hpp"
#include "rscnet/data/synthetic.hpp"
#include "rscnet/eval/chart.hpp"
#include "rscnet/eval/metrics.hpp"
#include "rscnet/eval/sweep.hpp"
#include "rscnet/model/checkpoint.hpp"
#include "rscnet/model/flops.hpp"
#include "rscnet/stream/runtime.hpp"

namespace rscnet::cli {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"model", c.model}, {"train", c.train}, {"manifest", c.manifest}, {"checkpoint", c.checkpoint}, {"out", c.out}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  check_config(j.is_object(), "config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "model") c.model = value.get<model::ModelConfig>();
    else if (key == "train") c.train = value.get<train::TrainConfig>();
    else if (key == "manifest") c.manifest = value.get<std::string>();
    else if (key == "checkpoint") c.checkpoint = value.get<std::string>();
    else if (key == "out") c.out = value.get<std::string>();
    else throw ConfigError(fmt::format("config: unknown key '{}'", key));
  }
}

RunConfig resolve(const Args& a) {
  RunConfig rc;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw ConfigError(fmt::format("cannot open config {}", a.config));
    try {
      rc = nlohmann::json::parse(in).get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("config {}: {}", a.config, e.what()));
    }
  }
  if (a.seed) rc.train.seed = *a.seed;
  if (a.out) rc.out = *a.out;
  if (a.checkpoint) rc.checkpoint = *a.checkpoint;
  if (a.manifest) rc.manifest = *a.manifest;
  if (a.nf) rc.model.window_frames = *a.nf;
  if (a.eta) rc.model.compression_ratio = model::parse_ratio(*a.eta);
  if (a.rho) rc.model.expansion_rate = *a.rho;
  if (a.lambda) rc.train.loss_weight = *a.lambda;
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (a.batch) rc.train.batch_size = *a.batch;
  if (a.lr) rc.train.learning_rate = *a.lr;
  if (a.optimizer) rc.train.optimizer = nlohmann::json(*a.optimizer).get<train::Optimizer>();
  // The training record owns lambda; the model copy only documents it.
  rc.model.loss_weight = rc.train.loss_weight;
  rc.model.validate();
  rc.train.validate();
  return rc;
}

namespace {

// --- flags ----------------------------------------------------------------------

void add_config_flag(CLI::App* app, Args& a) {
  app->add_option("--config", a.config, "JSON run configuration; flags override its values");
}

void add_seed_flag(CLI::App* app, Args& a) {
  app->add_option("--seed", a.seed, "Seed for initialization, shuffling and synthetic data (default 0)");
}

void add_model_flags(CLI::App* app, Args& a) {
  app->add_option("--nf", a.nf, "Frames per window N_f");
  app->add_option("--eta", a.eta, "Compression ratio, e.g. 1/90 or 0.0111");
  app->add_option("--rho", a.rho, "Decoder expansion rate");
}

void add_train_flags(CLI::App* app, Args& a) {
  app->add_option("--lambda", a.lambda, "Reconstruction loss weight");
  app->add_option("--epochs", a.epochs, "Training epochs");
  app->add_option("--batch", a.batch, "Mini-batch size");
  app->add_option("--lr", a.lr, "Initial learning rate");
  app->add_option("--optimizer", a.optimizer, "sgd (default) or adam")->check(CLI::IsMember({"sgd", "adam"}));
}

void add_data_flags(CLI::App* app, Args& a, bool with_split) {
  app->add_option("--manifest", a.manifest, "Dataset manifest; without it the built-in synthetic set is generated");
  if (with_split)
    app->add_option("--split", a.split, "Dataset split to use")->check(CLI::IsMember({"train", "val", "test"}));
}

void add_checkpoint_flag(CLI::App* app, Args& a) {
  app->add_option("--checkpoint", a.checkpoint, "Inference checkpoint (.rsck) written by train");
}

// --- shared plumbing ------------------------------------------------------------------

data::SyntheticChannelConfig synthetic_config(const model::ModelConfig& m, std::uint64_t seed) {
  data::SyntheticChannelConfig sc;
  sc.n_antennas = m.n_antennas;
  sc.n_subcarriers = m.n_subcarriers;
  sc.n_timesteps = m.n_timesteps;
  sc.seed = seed;
  return sc;
}

// Raw (unnormalized) data: the manifest if given, else synthetic 700/100/100.
data::DatasetSplit load_data(const std::string& manifest, const model::ModelConfig& m, std::uint64_t seed) {
  data::DatasetSplit split;
  if (!manifest.empty()) {
    split = data::load_dataset(manifest);
  } else {
    split = data::generate_synthetic(synthetic_config(m, seed), {}, m.n_classes);
  }
  const Shape want{m.n_antennas, m.n_subcarriers, m.n_timesteps};
  check_config(split.dims == want, fmt::format("dataset dims {} do not match the model's {}", shape_str(split.dims),
                                               shape_str(want)));
  check_config(split.classes.size() == m.n_classes,
               fmt::format("dataset has {} classes, model expects {}", split.classes.size(), m.n_classes));
  return split;
}

std::vector<data::CsiSample>& pick(data::DatasetSplit& split, const std::string& name) {
  auto& part = name == "train" ? split.train : name == "val" ? split.val : split.test;
  check_config(!part.empty(), fmt::format("split '{}' is empty", name));
  return part;
}

struct LoadedModel {
  model::Checkpoint ckpt;
  model::RscnetModel<float> model;
  data::NormStats stats;
};

std::unique_ptr<LoadedModel> load_model(const RunConfig& rc) {
  check_config(!rc.checkpoint.empty(), "--checkpoint is required");
  auto ckpt = model::load_checkpoint(rc.checkpoint);
  auto out = std::make_unique<LoadedModel>(LoadedModel{ckpt, model::RscnetModel<float>(ckpt.config), {}});
  out->model.load_state_dict(ckpt.as_map());
  out->stats = train::checkpoint_stats(ckpt);
  return out;
}

std::vector<data::CsiSample> normalized(std::vector<data::CsiSample> samples, const data::NormStats& stats) {
  if (stats.mean.empty()) return samples;
  for (auto& s : samples) s.amplitude = data::normalize(s.amplitude, stats);
  return samples;
}

std::vector<std::string> class_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i)
    names.push_back(n == data::kActivityNames.size() ? std::string(data::kActivityNames[i]) : fmt::format("class {}", i));
  return names;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
}

std::string db_text(double v) { return std::isnan(v) ? "n/a" : fmt::format("{:.2f} dB", v); }

void print_eval(const eval::EvalResult& r) {
  fmt::print("samples {}  accuracy {:.4f}  nmse {}  (pooled {}, raw {})\n", r.count, r.accuracy, db_text(r.nmse_db),
             db_text(r.nmse_db_pooled), db_text(r.nmse_db_raw));
}

// --- signals ------------------------------------------------------------------------

std::atomic<bool> g_interrupted{false};
stream::TcpListener* g_listener = nullptr;

void on_signal(int) {
  g_interrupted = true;
  if (g_listener != nullptr) g_listener->stop();
}

// Ctrl-C interrupts blocking calls instead of killing the process.
void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sa.sa_flags = 0;
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

// --- commands ---------------------------------------------------------------------------

void cmd_train(const Args& a) {
  const auto rc = resolve(a);
  auto split = data::normalize(load_data(rc.manifest, rc.model, rc.train.seed));
  const fs::path out = rc.out.empty() ? "runs/train" : rc.out;
  fmt::print("training on {} samples ({} val, {} test), M = {}, {} epochs, batch {}\n", split.train.size(),
             split.val.size(), split.test.size(), rc.model.compressed_dim(), rc.train.epochs, rc.train.batch_size);
  model::RscnetModel<float> model(rc.model, rc.train.seed);
  train::TrainOptions options;
  options.out_dir = out;
  options.resume = a.resume;
  options.on_epoch = [](const train::EpochStats& e) {
    fmt::print("epoch {:>3}  loss {:.4f}  (c {:.4f}, r {:.4f})  val acc {:.4f}  val nmse {:.2f} dB  lr {:.5f}  {:.1f}s\n",
               e.epoch, e.train_loss, e.loss_c, e.loss_r, e.val_accuracy, e.val_nmse_db, e.lr, e.wall_time_s);
    std::fflush(stdout);
  };
  const auto result = train::train(model, split, rc.train, options);
  const auto& rep = result.report;

  std::vector<std::string> epochs;
  eval::Series loss{"train loss", {}}, acc{"val accuracy", {}}, nmse{"val NMSE (dB)", {}};
  for (const auto& e : rep.epochs) {
    epochs.push_back(std::to_string(e.epoch));
    loss.values.push_back(e.train_loss);
    acc.values.push_back(e.val_accuracy);
    nmse.values.push_back(e.val_nmse_db);
  }
  write_file(out / "charts" / "loss.svg", eval::line_chart_svg("Training loss", "epoch", "loss", epochs, {loss}));
  write_file(out / "charts" / "val_accuracy.svg",
             eval::line_chart_svg("Validation accuracy", "epoch", "accuracy", epochs, {acc}));
  write_file(out / "charts" / "val_nmse.svg", eval::line_chart_svg("Validation NMSE", "epoch", "dB", epochs, {nmse}));

  fmt::print("best epoch {}  val accuracy {:.4f}  ({:.1f}s)\n", rep.best_epoch, rep.best_val_accuracy, rep.wall_time_s);
  if (!split.test.empty()) {
    model.load_state_dict(std::map<std::string, Array<float>>(result.best_state.begin(), result.best_state.end()));
    const auto r = eval::evaluate(model, split.test, &split.stats, rc.train.batch_size);
    fmt::print("test: ");
    print_eval(r);
    write_file(out / "test_eval.json", eval::to_json(r).dump(2) + "\n");
  }
  fmt::print("wrote {}\n", out.string());
}

void cmd_eval(const Args& a) {
  const auto rc = resolve(a);
  auto loaded = load_model(rc);
  auto split = load_data(rc.manifest, loaded->model.config(), rc.train.seed);
  const auto samples = normalized(pick(split, a.split), loaded->stats);
  const auto r = eval::evaluate(loaded->model, samples, &loaded->stats, rc.train.batch_size);
  fmt::print("{}: ", a.split);
  print_eval(r);
  if (!rc.out.empty()) {
    write_file(fs::path(rc.out) / "eval.json", eval::to_json(r).dump(2) + "\n");
    fmt::print("wrote {}\n", (fs::path(rc.out) / "eval.json").string());
  }
}

void cmd_sweep(const Args& a) {
  const auto rc = resolve(a);
  const auto axis = eval::parse_axis(a.axis);
  auto split = data::normalize(load_data(rc.manifest, rc.model, rc.train.seed));
  const fs::path out = rc.out.empty() ? "runs/sweep" : rc.out;
  const auto outcome = eval::run_sweep(axis, a.values, rc.model, rc.train, split, out);
  fmt::print("{:>10} {:>6} {:>10} {:>12} {:>14}\n", eval::axis_name(axis), "M", "accuracy", "NMSE (dB)", "FLOPs/sample");
  for (const auto& row : outcome.rows) {
    fmt::print("{:>10} {:>6} {:>10.4f} {:>12.2f} {:>14}\n", row.value, row.result.config.compressed_dim(),
               row.result.accuracy, row.result.nmse_db, row.result.flops.per_sample());
  }
  for (const auto& [value, reason] : outcome.skipped) fmt::print("skipped {}: {}\n", value, reason);
  fmt::print("wrote {}\n", (out / "sweep.csv").string());
}

void cmd_flops(const Args& a) {
  const auto rc = resolve(a);
  constexpr std::size_t kFrames[] = {5, 10, 25, 50, 125, 250};
  fmt::print("eta = {:.6g}, rho = {}; encoder/recurrent/decoder per window, classifier and total per sample\n",
             rc.model.compression_ratio, rc.model.expansion_rate);
  fmt::print("{:>5} {:>5} {:>7} {:>12} {:>10} {:>12} {:>11} {:>13}\n", "N_f", "S", "M", "encoder", "recurrent",
             "decoder", "classifier", "total");
  std::string csv = "n_frames,windows,compressed_dim,encoder,recurrent,decoder,classifier,sample\n";
  std::vector<std::string> cats;
  eval::Series enc{"encoder", {}}, rec{"recurrent", {}}, dec{"decoder", {}}, cls{"classifier", {}};
  for (std::size_t nf : kFrames) {
    if (rc.model.n_timesteps % nf != 0) continue;
    auto cfg = rc.model;
    cfg.window_frames = nf;
    const auto f = model::flops_count(cfg);
    fmt::print("{:>5} {:>5} {:>7} {:>12} {:>10} {:>12} {:>11} {:>13}\n", nf, f.windows, cfg.compressed_dim(), f.encoder,
               f.recurrent, f.decoder, f.classifier, f.per_sample());
    csv += fmt::format("{},{},{},{},{},{},{},{}\n", nf, f.windows, cfg.compressed_dim(), f.encoder, f.recurrent,
                       f.decoder, f.classifier, f.per_sample());
    cats.push_back(std::to_string(nf));
    enc.values.push_back(double(f.windows * f.encoder));
    rec.values.push_back(double(f.windows * f.recurrent));
    dec.values.push_back(double(f.windows * f.decoder));
    cls.values.push_back(double(f.classifier));
  }
  auto r1 = rc.model, r5 = rc.model;
  r1.expansion_rate = 1;
  r5.expansion_rate = 5;
  const auto d1 = model::flops_count(r1).decoder, d5 = model::flops_count(r5).decoder;
  fmt::print("decoder at N_f = {}: rho=1 {}  rho=5 {}  ratio {:.2f}\n", rc.model.window_frames, d1, d5,
             double(d5) / double(d1));
  if (!rc.out.empty()) {
    const fs::path out = rc.out;
    write_file(out / "flops.csv", csv);
    write_file(out / "charts" / "flops.svg",
               eval::bar_chart_svg("FLOPs per sample by component", "FLOPs", cats, {enc, rec, dec, cls}, true));
    fmt::print("wrote {}\n", (out / "flops.csv").string());
  }
}

void cmd_synth(const Args& a) {
  const auto rc = resolve(a);
  check_config(!rc.out.empty(), "--out is required");
  check_config(a.per_class > 0, "--per-class must be positive");
  const std::size_t c = rc.model.n_classes;
  const auto split =
      data::generate_synthetic(synthetic_config(rc.model, rc.train.seed), {a.per_class * c, a.val, a.test}, c);
  const auto manifest = data::save_dataset(split, rc.out);
  fmt::print("wrote {} ({} train, {} val, {} test)\n", manifest.string(), split.train.size(), split.val.size(),
             split.test.size());
}

void cmd_export(const Args& a) {
  const auto rc = resolve(a);
  check_config(!rc.out.empty(), "--out is required");
  auto loaded = load_model(rc);
  auto split = load_data(rc.manifest, loaded->model.config(), rc.train.seed);
  const auto samples = normalized(pick(split, a.split), loaded->stats);
  eval::export_embeddings(loaded->model, samples, rc.out, rc.train.batch_size);
  fmt::print("wrote {} samples x {} stages to {}\n", samples.size(), std::size(eval::kEmbeddingStages), rc.out);
}

void cmd_edge(const Args& a) {
  const auto rc = resolve(a);
  auto loaded = load_model(rc);
  auto split = load_data(rc.manifest, loaded->model.config(), rc.train.seed);
  std::vector<Array<float>> raw;
  for (const auto& s : pick(split, a.split)) {
    if (a.limit != 0 && raw.size() == a.limit) break;
    raw.push_back(s.amplitude);
  }
  install_signal_handlers();
  auto frames = stream::sample_frames(std::move(raw));
  stream::FrameSource source = [&]() -> std::optional<Array<float>> {
    if (g_interrupted) return std::nullopt;
    return frames();
  };
  auto conn = stream::tcp_connect(stream::parse_endpoint(a.connect));
  const auto stats = stream::edge_run(source, loaded->model, loaded->stats, *conn, {a.session, 0, a.retries});
  conn->close();
  double latency = 0;
  for (const auto& w : stats.windows) latency += w.latency_ms;
  if (!stats.windows.empty()) latency /= double(stats.windows.size());
  fmt::print("session {}: {} samples, {} frames, {} bytes sent for {} raw ({:.5f}), mean window latency {:.2f} ms\n",
             a.session, stats.samples, stats.frames, stats.sent_bytes, stats.raw_bytes,
             stats.raw_bytes == 0 ? 0.0 : double(stats.sent_bytes) / double(stats.raw_bytes), latency);
}

// Appends completed reconstructions (denormalized) in the dataset file format.
class ReconstructionLog {
 public:
  ReconstructionLog(fs::path dir, const model::ModelConfig& cfg, data::NormStats stats)
      : dir_(std::move(dir)), cfg_(cfg), stats_(std::move(stats)) {
    fs::create_directories(dir_);
    data_.open(dir_ / "test.f32", std::ios::binary | std::ios::trunc);
    labels_.open(dir_ / "test.u8", std::ios::binary | std::ios::trunc);
    if (!data_ || !labels_) throw Error(fmt::format("cannot write reconstructions to {}", dir_.string()));
  }

  void window(const stream::ReconstructedWindow& w) { pending_[{w.session_id, w.sample_id}].push_back(w.window); }

  void complete(const stream::Prediction& p) {
    auto node = pending_.extract({p.session_id, p.sample_id});
    auto sample = data::merge_windows(node.mapped());
    if (!stats_.mean.empty()) sample = data::denormalize(sample, stats_);
    std::vector<std::uint8_t> buf;
    for (float v : sample.values()) bytes::put_f32_le(buf, v);
    data_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    const auto label = static_cast<char>(p.label);
    labels_.write(&label, 1);
    data_.flush();
    labels_.flush();
    ++count_;
  }

  void finish(const std::vector<std::string>& classes) {
    nlohmann::json m = {{"dims", {cfg_.n_antennas, cfg_.n_subcarriers, cfg_.n_timesteps}},
                        {"classes", classes},
                        {"splits", {{"test", {{"data", "test.f32"}, {"labels", "test.u8"}, {"count", count_}}}}}};
    write_file(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  model::ModelConfig cfg_;
  data::NormStats stats_;
  std::ofstream data_, labels_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<Array<float>>> pending_;
  std::size_t count_ = 0;
};

void cmd_cloud(const Args& a) {
  const auto rc = resolve(a);
  auto loaded = load_model(rc);
  const auto& cfg = loaded->model.config();
  const auto classes = class_names(cfg.n_classes);

  std::ofstream file;
  if (!rc.out.empty()) {
    const fs::path path = rc.out;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    file.open(path, std::ios::trunc);
    if (!file) throw Error(fmt::format("cannot write {}", rc.out));
  }
  std::ostream& sink = rc.out.empty() ? std::cout : file;
  std::unique_ptr<ReconstructionLog> recon;
  if (!a.reconstructions.empty()) recon = std::make_unique<ReconstructionLog>(a.reconstructions, cfg, loaded->stats);

  stream::CloudOptions options;
  options.continuous_state = a.continuous;
  options.window_timeout_s = a.timeout;
  options.on_prediction = [&](const stream::Prediction& p) {
    sink << stream::prediction_json(p, classes) << '\n' << std::flush;
    if (recon) recon->complete(p);
  };
  if (recon) options.on_window = [&](const stream::ReconstructedWindow& w) { recon->window(w); };
  options.on_log = [](const std::string& m) { fmt::print(stderr, "cloud: {}\n", m); };
  stream::Cloud cloud(loaded->model, options);

  stream::TcpListener listener(stream::parse_endpoint(a.listen));
  g_listener = &listener;
  install_signal_handlers();
  fmt::print(stderr, "cloud: listening on port {}\n", listener.port());
  stream::serve_tcp(listener, cloud, a.max_connections);
  g_listener = nullptr;
  cloud.flush();
  if (recon) recon->finish(classes);

  for (auto id : cloud.sessions()) {
    const auto c = cloud.counters(id);
    const auto r = stream::overhead_report(c);
    fmt::print(stderr,
               "cloud: session {}: {} samples ({} dropped{}), {} frames, sent {} B for {} B raw, ratio {:.5f}, "
               "{:.1f} B/frame\n",
               id, c.completed, c.dropped, c.rejected ? ", rejected: " + c.reject_reason : "", r.frames, r.sent_bytes,
               r.raw_bytes, r.ratio, r.mean_frame_bytes);
  }
}

}  // namespace

std::unique_ptr<CLI::App> make_app(Args& a) {
  auto app = std::make_unique<CLI::App>("Windowed CSI compression, reconstruction and activity recognition", "rscnet");
  app->require_subcommand(1);
  app->set_help_all_flag("--help-all", "Help for every subcommand");

  auto* train = app->add_subcommand("train", "Train a model; writes checkpoints, report.csv, summary.json and charts");
  add_config_flag(train, a);
  add_seed_flag(train, a);
  add_model_flags(train, a);
  add_train_flags(train, a);
  add_data_flags(train, a, false);
  train->add_option("--out", a.out, "Output directory (default runs/train)");
  train->add_option("--resume", a.resume, "Resume from a checkpoints/last.rsck of an interrupted run");

  auto* ev = app->add_subcommand("eval", "Score a checkpoint: accuracy, NMSE and confusion matrix");
  add_config_flag(ev, a);
  add_seed_flag(ev, a);
  add_checkpoint_flag(ev, a);
  add_data_flags(ev, a, true);
  ev->add_option("--batch", a.batch, "Inference batch size");
  ev->add_option("--out", a.out, "Directory for eval.json");

  auto* sweep = app->add_subcommand("sweep", "Train and score one model per value of N_f, eta or rho");
  add_config_flag(sweep, a);
  add_seed_flag(sweep, a);
  add_model_flags(sweep, a);
  add_train_flags(sweep, a);
  add_data_flags(sweep, a, false);
  sweep->add_option("--axis", a.axis, "Swept hyperparameter")->required()->check(CLI::IsMember({"N_f", "eta", "rho"}));
  sweep->add_option("--values", a.values, "Values to sweep, comma separated")->required()->delimiter(',');
  sweep->add_option("--out", a.out, "Output directory (default runs/sweep)");

  auto* flops = app->add_subcommand("flops", "Per-component FLOPs table over N_f and the decoder rho=1/rho=5 ratio");
  add_config_flag(flops, a);
  add_model_flags(flops, a);
  flops->add_option("--out", a.out, "Directory for flops.csv and charts/flops.svg");

  auto* synth = app->add_subcommand("synth", "Generate the synthetic dataset and write it with a manifest");
  add_config_flag(synth, a);
  add_seed_flag(synth, a);
  synth->add_option("--out", a.out, "Output directory")->required();
  synth->add_option("--per-class", a.per_class, "Training samples per class")->capture_default_str();
  synth->add_option("--val", a.val, "Validation samples")->capture_default_str();
  synth->add_option("--test", a.test, "Test samples")->capture_default_str();

  auto* exp = app->add_subcommand("export-embeddings", "Write per-sample embeddings of each stage as CSV");
  add_config_flag(exp, a);
  add_seed_flag(exp, a);
  add_checkpoint_flag(exp, a);
  add_data_flags(exp, a, true);
  exp->add_option("--batch", a.batch, "Inference batch size");
  exp->add_option("--out", a.out, "Output directory")->required();

  auto* edge = app->add_subcommand("edge", "Stream encoded windows of recorded samples to a cloud process");
  add_config_flag(edge, a);
  add_seed_flag(edge, a);
  add_checkpoint_flag(edge, a);
  add_data_flags(edge, a, true);
  edge->add_option("--connect", a.connect, "Cloud address host:port")->capture_default_str();
  edge->add_option("--session", a.session, "Session id carried in every frame")->capture_default_str();
  edge->add_option("--retries", a.retries, "Extra attempts per frame before aborting")->capture_default_str();
  edge->add_option("--limit", a.limit, "Stream at most this many samples (0 = all)")->capture_default_str();

  auto* cloud = app->add_subcommand("cloud", "Receive windows, reconstruct and classify; one JSON line per sample");
  add_config_flag(cloud, a);
  add_checkpoint_flag(cloud, a);
  cloud->add_option("--listen", a.listen, "Listen address host:port")->capture_default_str();
  cloud->add_option("--out", a.out, "Prediction file (default stdout)");
  cloud->add_option("--reconstructions", a.reconstructions, "Directory for a reconstruction log in dataset format");
  cloud->add_flag("--continuous", a.continuous, "Carry LSTM state across samples instead of resetting it");
  cloud->add_option("--timeout", a.timeout, "Seconds to wait for a missing window")->capture_default_str();
  cloud->add_option("--max-connections", a.max_connections, "Exit after this many connections (0 = run until Ctrl-C)")
      ->capture_default_str();
  return app;
}

namespace {

int dispatch(CLI::App& app, const Args& a) {
  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "train") cmd_train(a);
  else if (name == "eval") cmd_eval(a);
  else if (name == "sweep") cmd_sweep(a);
  else if (name == "flops") cmd_flops(a);
  else if (name == "synth") cmd_synth(a);
  else if (name == "export-embeddings") cmd_export(a);
  else if (name == "edge") cmd_edge(a);
  else if (name == "cloud") cmd_cloud(a);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  Args args;
  auto app = make_app(args);
  try {
    app->parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app->exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return dispatch(*app, args);
  } catch (const std::exception& e) {
    std::fflush(stdout);
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
}

int run(const std::vector<std::string>& argv) {
  std::vector<const char*> ptrs;
  for (const auto& s : argv) ptrs.push_back(s.c_str());
  return run(static_cast<int>(ptrs.size()), ptrs.data());
}

}  // namespace rscnet::cli
