#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rscnet/data/dataset.hpp"

namespace rscnet::data {

enum class MotionKind { still, periodic, transition };

// How the body-reflected path moves during one activity, with u = t/N_t:
//   periodic:   tau_0 + excursion * sin(2*pi*(cycles*u + start))
//   transition: tau_0 + excursion * s(u), amplitude * (1 + (gain-1) * s(u)),
//               s a raised-cosine step from 0 to 1 over [start, start+duration]
//   still:      tau_0
struct MotionTemplate {
  MotionKind kind = MotionKind::still;
  double cycles = 0.0;       // periodic: periods per recording
  double excursion_s = 0.0;  // periodic: peak deviation; transition: total shift (seconds)
  double duration = 0.0;     // transition: fraction of the recording
  double gain = 1.0;         // transition: final over initial reflector amplitude
};

// Per-frame delay offset and amplitude factor of the moving path. `start` is
// a phase in cycles (periodic) or the onset as a fraction of the recording
// (transition).
struct BodyMotion {
  std::vector<double> delay_s;
  std::vector<double> gain;
};
BodyMotion body_motion(const MotionTemplate& m, double start, std::size_t n_frames);

// Multipath room with one moving reflector. Every recording shares the static
// paths up to a small per-recording jitter; the reflector's start delay,
// strength and timing are drawn per recording.
struct SyntheticChannelConfig {
  std::size_t n_antennas = 3;
  std::size_t n_subcarriers = 30;
  std::size_t n_timesteps = 250;
  double center_hz = 5.32e9;
  double bandwidth_hz = 20e6;

  std::vector<double> path_amplitudes{1.0, 0.6, 0.4, 0.25};
  std::vector<double> path_delays_s{20e-9, 35e-9, 52e-9, 70e-9};
  double antenna_delay_step_s = 0.3e-9;
  double delay_jitter_s = 0.005e-9;

  double body_amplitude_min = 0.4;
  double body_amplitude_max = 0.6;
  double body_delay_min_s = 25e-9;
  double body_delay_max_s = 45e-9;
  double rate_jitter = 0.05;       // relative, on cycles and duration
  double excursion_jitter = 0.10;  // relative, on excursion and gain - 1
  // 1 spreads transition onsets over the whole recording and periodic phases
  // over a full cycle; 0 pins both.
  double timing_jitter = 0.25;

  // Std of the complex receiver noise added before taking magnitudes.
  double noise_std = 0.01;
  std::uint64_t seed = 7;

  // One per class, in class-id order.
  std::vector<MotionTemplate> templates = default_templates();

  static std::vector<MotionTemplate> default_templates();
  void validate(std::size_t n_classes) const;
};

struct Path {
  double amplitude = 1.0;
  std::vector<double> delay_s;  // one per frame
  std::vector<double> gain;     // per-frame amplitude factor; empty means 1
};

// Evenly spaced tones spanning bandwidth_hz around center_hz.
std::vector<double> subcarrier_frequencies(const SyntheticChannelConfig& config);

// |sum_n a_n exp(-j 2 pi f_i tau_n(t))| -> [N_s, N_t]
Array<double> cfr_amplitude(std::span<const double> frequencies, std::span<const Path> paths, std::size_t n_frames);

struct SyntheticSizes {
  std::size_t train = 700;
  std::size_t val = 100;
  std::size_t test = 100;
};

// Labels cycle through the classes, so every split is balanced to within one
// sample per class. Recording k of split p is drawn from its own random
// stream keyed by (seed, p, k).
DatasetSplit generate_synthetic(const SyntheticChannelConfig& config, SyntheticSizes sizes, std::size_t n_classes = 7);

CsiSample synthetic_sample(const SyntheticChannelConfig& config, int label, std::uint64_t stream_a,
                           std::uint64_t stream_b);

}  // namespace rscnet::data
