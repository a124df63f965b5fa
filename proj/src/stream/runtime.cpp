#include "rscnet/stream/runtime.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <exception>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rscnet/numerics/ops.hpp"

namespace rscnet::stream {

namespace {

double seconds_now() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

FrameSource sample_frames(std::vector<Array<float>> samples) {
  struct Cursor {
    std::vector<Array<float>> samples;
    std::size_t sample = 0;
    std::size_t frame = 0;
  };
  auto cur = std::make_shared<Cursor>(Cursor{std::move(samples)});
  return [cur]() -> std::optional<Array<float>> {
    if (cur->sample >= cur->samples.size()) return std::nullopt;
    const auto& s = cur->samples[cur->sample];
    check_shape(s.rank() == 3, "sample_frames: samples must be [N_a, N_s, N_t]");
    const std::size_t rows = s.dim(0) * s.dim(1);
    const std::size_t nt = s.dim(2);
    Array<float> frame({s.dim(0), s.dim(1)});
    for (std::size_t r = 0; r < rows; ++r) frame[r] = s[r * nt + cur->frame];
    if (++cur->frame == nt) {
      cur->frame = 0;
      ++cur->sample;
    }
    return frame;
  };
}

// --- edge -------------------------------------------------------------------

EdgeEncoder::EdgeEncoder(const model::RscnetModel<float>& model, data::NormStats stats, EdgeOptions options)
    : model_(model),
      stats_(std::move(stats)),
      options_(options),
      window_(model.config().window_size()),
      sample_id_(options.first_sample_id) {
  const auto& cfg = model.config();
  if (!stats_.mean.empty())
    check_shape(stats_.mean.size() == cfg.n_antennas * cfg.n_subcarriers, "edge: statistics do not match the model");
}

std::optional<WireFrame> EdgeEncoder::push(const Array<float>& csi_frame) {
  const auto& cfg = model_.config();
  const std::size_t rows = cfg.n_antennas * cfg.n_subcarriers;
  check_shape(csi_frame.size() == rows,
              fmt::format("edge: CSI frame has {} values, expected {}", csi_frame.size(), rows));
  const std::size_t nf = cfg.window_frames;
  for (std::size_t r = 0; r < rows; ++r) window_[r * nf + buffered_] = csi_frame[r];
  if (++buffered_ < nf) return std::nullopt;
  buffered_ = 0;

  Array<float> window({cfg.n_antennas, cfg.n_subcarriers, nf}, window_);
  if (!stats_.mean.empty()) window = data::normalize(window, stats_);
  const auto code = model_.encode(Tensor<float>::constant(std::move(window)));

  WireFrame f;
  f.session_id = options_.session_id;
  f.sample_id = sample_id_;
  f.window_index = window_index_;
  f.payload = code.value().storage();
  if (++window_index_ == cfg.window_count()) {
    window_index_ = 0;
    ++sample_id_;
  }
  return f;
}

EdgeStats edge_run(const FrameSource& source, const model::RscnetModel<float>& model, const data::NormStats& stats,
                   ByteSink& sink, const EdgeOptions& options) {
  const auto& cfg = model.config();
  EdgeEncoder encoder(model, stats, options);
  EdgeStats out;
  while (auto frame = source()) {
    const auto window_start = std::chrono::steady_clock::now();
    auto wire = encoder.push(*frame);
    if (!wire) continue;
    const auto bytes = encode_frame(*wire);
    for (std::size_t attempt = 0;; ++attempt) {
      try {
        sink.write(bytes);
        break;
      } catch (const TransportError&) {
        if (attempt >= options.max_retries) throw;
      }
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - window_start).count();
    ++out.frames;
    out.sent_bytes += bytes.size();
    out.raw_bytes += 4 * cfg.window_size();
    if (wire->window_index + 1u == cfg.window_count()) ++out.samples;
    out.windows.push_back({wire->sample_id, wire->window_index, bytes.size(), ms});
  }
  out.leftover_frames = encoder.buffered_frames();
  return out;
}

// --- accounting ---------------------------------------------------------------

OverheadReport overhead_report(const model::ModelConfig& cfg, std::size_t frames) {
  SessionCounters c;
  c.frames = frames;
  c.sent_bytes = frames * frame_size(cfg.compressed_dim());
  c.raw_bytes = frames * 4 * cfg.window_size();
  return overhead_report(c);
}

OverheadReport overhead_report(const SessionCounters& s) {
  OverheadReport r;
  r.raw_bytes = s.raw_bytes;
  r.sent_bytes = s.sent_bytes;
  r.frames = s.frames;
  r.ratio = s.raw_bytes == 0 ? 0.0 : static_cast<double>(s.sent_bytes) / static_cast<double>(s.raw_bytes);
  r.mean_frame_bytes = s.frames == 0 ? 0.0 : static_cast<double>(s.sent_bytes) / static_cast<double>(s.frames);
  return r;
}

std::string prediction_json(const Prediction& p, const std::vector<std::string>& class_names) {
  nlohmann::json j;
  j["session"] = p.session_id;
  j["sample"] = p.sample_id;
  j["class"] = p.label;
  if (p.label >= 0 && static_cast<std::size_t>(p.label) < class_names.size()) j["name"] = class_names[p.label];
  j["logits"] = p.logits;
  return j.dump();
}

// --- cloud --------------------------------------------------------------------

Cloud::Cloud(const model::RscnetModel<float>& model, CloudOptions options)
    : model_(model), options_(std::move(options)), config_hash_(model.config().hash()) {}

void Cloud::log(const std::string& msg) const {
  if (options_.on_log) options_.on_log(msg);
}

void Cloud::reject(std::uint32_t id, Session& s, const std::string& reason) {
  if (s.counters.rejected) return;
  s.counters.rejected = true;
  s.counters.reject_reason = reason;
  s.counters.dropped += s.pending.size();
  s.pending.clear();
  log(fmt::format("session {} rejected: {}", id, reason));
}

void Cloud::register_session(std::uint32_t session_id, std::uint32_t config_hash) {
  std::lock_guard lock(mu_);
  auto& s = sessions_[session_id];
  if (config_hash != config_hash_)
    reject(session_id, s, fmt::format("config hash {:08x} does not match {:08x}", config_hash, config_hash_));
}

void Cloud::accept(const WireFrame& frame, double now_s) {
  std::lock_guard lock(mu_);
  const auto& cfg = model_.config();
  auto& s = sessions_[frame.session_id];
  if (s.counters.rejected) return;
  s.counters.frames += 1;
  s.counters.sent_bytes += frame_size(frame.payload.size());
  s.counters.raw_bytes += 4 * cfg.window_size();

  if (frame.payload.size() != cfg.compressed_dim()) {
    reject(frame.session_id, s,
           fmt::format("payload of {} values, model expects {}", frame.payload.size(), cfg.compressed_dim()));
    return;
  }
  if (frame.window_index >= cfg.window_count()) {
    reject(frame.session_id, s,
           fmt::format("window index {} out of range (S = {})", frame.window_index, cfg.window_count()));
    return;
  }
  if (s.finished.contains(frame.sample_id)) {
    log(fmt::format("session {} sample {}: late window {} ignored", frame.session_id, frame.sample_id,
                    frame.window_index));
    return;
  }
  auto& p = s.pending[frame.sample_id];
  if (frame.window_index < p.next || p.windows.contains(frame.window_index)) {
    log(fmt::format("session {} sample {}: duplicate window {} ignored", frame.session_id, frame.sample_id,
                    frame.window_index));
    return;
  }
  p.last_seen = now_s;
  p.windows.emplace(frame.window_index, frame.payload);
  advance(frame.session_id, s, frame.sample_id, p);
}

void Cloud::advance(std::uint32_t id, Session& s, std::uint32_t sample_id, Pending& p) {
  const auto& cfg = model_.config();
  const std::size_t m = cfg.compressed_dim();
  const std::size_t nh = cfg.hidden_dim();
  while (!p.windows.empty() && p.windows.begin()->first == p.next) {
    if (!p.state) p.state = (options_.continuous_state && s.carry) ? *s.carry : model_.zero_state(1);
    auto code = Tensor<float>::constant(Array<float>({1, 1, m}, std::move(p.windows.begin()->second)));
    p.windows.erase(p.windows.begin());
    auto rec = model_.recurrent(code, &*p.state);
    p.state = rec.final_state;
    auto h = ops::reshape(rec.hidden, {1, nh});
    p.hidden.push_back(h);
    if (options_.on_window) {
      auto window = model_.decode(h).value();
      options_.on_window({id, sample_id, p.next, window.reshaped({cfg.n_antennas, cfg.n_subcarriers, cfg.window_frames})});
    }
    ++p.next;
  }
  if (p.next < cfg.window_count()) return;

  const auto logits = model_.classify(ops::concat(p.hidden, 1)).logits.value();
  Prediction pred;
  pred.session_id = id;
  pred.sample_id = sample_id;
  pred.logits = logits.storage();
  pred.label = static_cast<int>(std::max_element(pred.logits.begin(), pred.logits.end()) - pred.logits.begin());
  s.carry = p.state;
  s.finished.insert(sample_id);
  s.pending.erase(sample_id);
  s.counters.completed += 1;
  if (options_.on_prediction) options_.on_prediction(pred);
}

void Cloud::expire(double now_s) {
  std::lock_guard lock(mu_);
  for (auto& [id, s] : sessions_) {
    for (auto it = s.pending.begin(); it != s.pending.end();) {
      if (now_s - it->second.last_seen > options_.window_timeout_s) {
        log(fmt::format("session {} sample {}: dropped, window {} missing after {:.1f} s", id, it->first,
                        it->second.next, options_.window_timeout_s));
        s.finished.insert(it->first);
        s.counters.dropped += 1;
        it = s.pending.erase(it);
      } else {
        ++it;
      }
    }
  }
}

void Cloud::flush() { expire(std::numeric_limits<double>::infinity()); }

std::vector<std::uint32_t> Cloud::sessions() const {
  std::lock_guard lock(mu_);
  std::vector<std::uint32_t> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

SessionCounters Cloud::counters(std::uint32_t session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  check_config(it != sessions_.end(), fmt::format("unknown session {}", session_id));
  return it->second.counters;
}

void cloud_run(ByteSource& source, Cloud& cloud) {
  FrameReader reader;
  std::array<std::uint8_t, 4096> buf{};
  for (;;) {
    const std::size_t n = source.read(buf);
    if (n == 0) break;
    reader.feed(std::span<const std::uint8_t>(buf.data(), n));
    const double now = seconds_now();
    while (auto frame = reader.next()) cloud.accept(*frame, now);
    cloud.expire(now);
  }
  if (reader.buffered() != 0)
    throw FrameError(FrameFault::truncated, fmt::format("stream ended inside a frame ({} bytes pending)", reader.buffered()));
}

void serve_tcp(TcpListener& listener, Cloud& cloud, std::size_t max_connections) {
  std::mutex mu;
  std::vector<std::weak_ptr<TcpStream>> open;
  std::vector<std::thread> workers;
  std::exception_ptr failure;
  for (std::size_t served = 0; max_connections == 0 || served < max_connections; ++served) {
    std::shared_ptr<TcpStream> conn;
    try {
      conn = listener.accept();
    } catch (...) {
      failure = std::current_exception();
    }
    if (!conn) break;
    {
      std::lock_guard lock(mu);
      open.push_back(conn);
    }
    workers.emplace_back([&cloud, conn] {
      try {
        cloud_run(*conn, cloud);
      } catch (const Error& e) {
        // A broken stream ends its connection only.
        cloud.log(fmt::format("connection closed: {}", e.what()));
      }
    });
  }
  if (listener.stopped() || failure) {
    std::lock_guard lock(mu);
    for (auto& w : open)
      if (auto c = w.lock()) c->shutdown_read();
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rscnet::stream
