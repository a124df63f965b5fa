#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rscnet/data/dataset.hpp"
#include "rscnet/model/rscnet.hpp"
#include "rscnet/stream/transport.hpp"
#include "rscnet/stream/wire.hpp"

namespace rscnet::stream {

// Yields one CSI frame [N_a, N_s] per call in time order; nullopt ends the stream.
using FrameSource = std::function<std::optional<Array<float>>()>;

// Replays recorded samples [N_a, N_s, N_t] frame by frame.
FrameSource sample_frames(std::vector<Array<float>> samples);

struct EdgeOptions {
  std::uint32_t session_id = 0;
  std::uint32_t first_sample_id = 0;
  // Extra attempts after a failed write before giving up.
  std::size_t max_retries = 0;
};

struct WindowEvent {
  std::uint32_t sample_id = 0;
  std::uint16_t window_index = 0;
  std::size_t bytes = 0;
  double latency_ms = 0;  // window complete -> frame handed to the transport
};

struct EdgeStats {
  std::size_t frames = 0;
  std::size_t sent_bytes = 0;
  std::size_t raw_bytes = 0;  // float32 size of the windows that were sent
  std::size_t samples = 0;
  std::size_t leftover_frames = 0;  // CSI frames of an incomplete trailing window
  std::vector<WindowEvent> windows;
};

// Buffers N_f CSI frames, z-scores them with `stats` (if non-empty), encodes
// and frames them. Sample ids advance every N_t frames.
class EdgeEncoder {
 public:
  EdgeEncoder(const model::RscnetModel<float>& model, data::NormStats stats, EdgeOptions options);

  std::optional<WireFrame> push(const Array<float>& csi_frame);
  std::size_t buffered_frames() const { return buffered_; }

 private:
  const model::RscnetModel<float>& model_;
  data::NormStats stats_;
  EdgeOptions options_;
  std::vector<float> window_;  // [N_a, N_s, N_f]
  std::size_t buffered_ = 0;
  std::uint32_t sample_id_;
  std::uint16_t window_index_ = 0;
};

// Runs the edge pipeline until the source ends. Each frame goes to the sink in
// one write() call. A TransportError survives max_retries re-attempts and is
// then rethrown.
EdgeStats edge_run(const FrameSource& source, const model::RscnetModel<float>& model, const data::NormStats& stats,
                   ByteSink& sink, const EdgeOptions& options = {});

struct Prediction {
  std::uint32_t session_id = 0;
  std::uint32_t sample_id = 0;
  int label = 0;
  std::vector<float> logits;
};

// Newline-delimited JSON: {"session":..,"sample":..,"class":..,"name":..,"logits":[..]}
std::string prediction_json(const Prediction& p, const std::vector<std::string>& class_names);

struct ReconstructedWindow {
  std::uint32_t session_id = 0;
  std::uint32_t sample_id = 0;
  std::uint16_t window_index = 0;
  Array<float> window;  // [N_a, N_s, N_f], in the model's (normalized) units
};

struct OverheadReport {
  std::size_t raw_bytes = 0;
  std::size_t sent_bytes = 0;
  std::size_t frames = 0;
  double ratio = 0;             // sent / raw, framing included
  double mean_frame_bytes = 0;
};

// Accounting for `frames` windows of shape cfg: raw is the float32 size of the
// CSI windows, sent counts whole frames.
OverheadReport overhead_report(const model::ModelConfig& cfg, std::size_t frames);

struct SessionCounters {
  std::size_t frames = 0;
  std::size_t sent_bytes = 0;
  std::size_t raw_bytes = 0;
  std::size_t completed = 0;
  std::size_t dropped = 0;
  bool rejected = false;
  std::string reject_reason;
};

OverheadReport overhead_report(const SessionCounters& session);

struct CloudOptions {
  // Carry LSTM state from one sample into the next instead of starting each
  // sample from zeros.
  bool continuous_state = false;
  // A sample with no new window for this long is dropped.
  double window_timeout_s = 30.0;
  std::function<void(const Prediction&)> on_prediction;
  std::function<void(const ReconstructedWindow&)> on_window;
  std::function<void(const std::string&)> on_log;
};

// Cloud half of the model. Thread-safe; frames are processed one at a time.
class Cloud {
 public:
  Cloud(const model::RscnetModel<float>& model, CloudOptions options);

  // Binds a session to the configuration hash its edge announced out of band.
  // A mismatch rejects the session. Unregistered sessions are checked
  // structurally only (payload size and window index).
  void register_session(std::uint32_t session_id, std::uint32_t config_hash);

  // `now_s` is any monotone clock in seconds.
  void accept(const WireFrame& frame, double now_s);
  // Drops samples whose last window arrived more than window_timeout_s ago.
  void expire(double now_s);
  // Drops every incomplete sample.
  void flush();

  // Forwards to options.on_log.
  void log(const std::string& msg) const;

  std::vector<std::uint32_t> sessions() const;
  SessionCounters counters(std::uint32_t session_id) const;

 private:
  struct Pending {
    std::map<std::uint16_t, std::vector<float>> windows;
    std::uint16_t next = 0;
    std::optional<ops::LstmState<float>> state;
    std::vector<Tensor<float>> hidden;
    double last_seen = 0;
  };
  struct Session {
    SessionCounters counters;
    std::map<std::uint32_t, Pending> pending;
    std::set<std::uint32_t> finished;
    std::optional<ops::LstmState<float>> carry;
  };

  void reject(std::uint32_t id, Session& s, const std::string& reason);
  void advance(std::uint32_t id, Session& s, std::uint32_t sample_id, Pending& p);

  const model::RscnetModel<float>& model_;
  CloudOptions options_;
  std::uint32_t config_hash_;
  mutable std::mutex mu_;
  std::map<std::uint32_t, Session> sessions_;
};

// Reads frames from `source` into `cloud` until end of stream. Malformed bytes
// throw FrameError; a stream ending inside a frame is a truncation.
void cloud_run(ByteSource& source, Cloud& cloud);

// Accepts connections and serves each on its own thread. Returns after
// `max_connections` connections have closed (0 means no limit), or once
// listener.stop() is called, after ending the open connections.
void serve_tcp(TcpListener& listener, Cloud& cloud, std::size_t max_connections = 0);

}  // namespace rscnet::stream
