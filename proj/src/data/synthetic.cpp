#include "rscnet/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "rscnet/rng.hpp"

namespace rscnet::data {

std::vector<MotionTemplate> SyntheticChannelConfig::default_templates() {
  using enum MotionKind;
  return {
      {transition, 0.0, 300e-12, 0.50, 0.5},   // lie down: slow, long shift, reflector shrinks
      {transition, 0.0, 300e-12, 0.06, 0.4},   // fall: abrupt
      {periodic, 2.0, 60e-12, 0.0, 1.0},       // walk
      {periodic, 6.0, 80e-12, 0.0, 1.0},       // run
      {transition, 0.0, 150e-12, 0.25, 0.7},   // sit down
      {transition, 0.0, -150e-12, 0.25, 1.4},  // stand up: moves back, reflector grows
      {still, 0.0, 0.0, 0.0, 1.0},             // empty room
  };
}

BodyMotion body_motion(const MotionTemplate& m, double start, std::size_t n_frames) {
  BodyMotion out{std::vector<double>(n_frames, 0.0), std::vector<double>(n_frames, 1.0)};
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double u = double(t) / double(n_frames);
    if (m.kind == MotionKind::periodic) {
      out.delay_s[t] = m.excursion_s * std::sin(2.0 * std::numbers::pi * (m.cycles * u + start));
    } else if (m.kind == MotionKind::transition) {
      const double x = m.duration > 0.0 ? std::clamp((u - start) / m.duration, 0.0, 1.0) : double(u >= start);
      const double step = 0.5 - 0.5 * std::cos(std::numbers::pi * x);
      out.delay_s[t] = m.excursion_s * step;
      out.gain[t] = 1.0 + (m.gain - 1.0) * step;
    }
  }
  return out;
}

void SyntheticChannelConfig::validate(std::size_t n_classes) const {
  check_config(n_antennas >= 1 && n_subcarriers >= 1 && n_timesteps >= 1, "synthetic: dims must be positive");
  check_config(!path_amplitudes.empty() && path_amplitudes.size() == path_delays_s.size(),
               "synthetic: path_amplitudes and path_delays_s must be non-empty and equal length");
  check_config(n_classes >= 1 && templates.size() >= n_classes,
               fmt::format("synthetic: {} classes but only {} motion templates", n_classes, templates.size()));
  check_config(noise_std >= 0.0, "synthetic: noise_std must be >= 0");
  check_config(body_amplitude_min >= 0.0 && body_amplitude_max >= body_amplitude_min,
               "synthetic: body amplitude range is invalid");
  check_config(timing_jitter >= 0.0 && timing_jitter <= 1.0, "synthetic: timing_jitter must lie in [0, 1]");
}

std::vector<double> subcarrier_frequencies(const SyntheticChannelConfig& config) {
  std::vector<double> f(config.n_subcarriers, config.center_hz);
  if (config.n_subcarriers == 1) return f;
  const double step = config.bandwidth_hz / static_cast<double>(config.n_subcarriers - 1);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = config.center_hz - config.bandwidth_hz / 2 + step * double(i);
  return f;
}

Array<double> cfr_amplitude(std::span<const double> frequencies, std::span<const Path> paths, std::size_t n_frames) {
  Array<double> out({frequencies.size(), n_frames});
  for (const auto& p : paths) {
    check_shape(p.delay_s.size() == n_frames, "cfr_amplitude: one delay per frame");
    check_shape(p.gain.empty() || p.gain.size() == n_frames, "cfr_amplitude: one gain per frame");
  }
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    for (std::size_t t = 0; t < n_frames; ++t) {
      std::complex<double> h = 0.0;
      for (const auto& p : paths) {
        const double a = p.gain.empty() ? p.amplitude : p.amplitude * p.gain[t];
        h += std::polar(a, -2.0 * std::numbers::pi * frequencies[i] * p.delay_s[t]);
      }
      out[i * n_frames + t] = std::abs(h);
    }
  }
  return out;
}

CsiSample synthetic_sample(const SyntheticChannelConfig& c, int label, std::uint64_t stream_a, std::uint64_t stream_b) {
  auto rng = stream(c.seed, stream_a, stream_b);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  MotionTemplate motion = c.templates.at(static_cast<std::size_t>(label));
  const double rate = between(1.0 - c.rate_jitter, 1.0 + c.rate_jitter);
  const double size = between(1.0 - c.excursion_jitter, 1.0 + c.excursion_jitter);
  motion.cycles *= rate;
  motion.duration = std::min(motion.duration * rate, 0.9);
  motion.excursion_s *= size;
  motion.gain = 1.0 + (motion.gain - 1.0) * size;
  // Transitions start and finish inside the recording; timing_jitter narrows
  // the onset range around its centre and the periodic phase range.
  double start = c.timing_jitter * unit(rng);
  if (motion.kind == MotionKind::transition) {
    const double centre = 0.5 - 0.5 * motion.duration, half = (0.45 - 0.5 * motion.duration) * c.timing_jitter;
    start = centre - half + 2.0 * half * unit(rng);
  }
  const auto moving = body_motion(motion, start, c.n_timesteps);
  const double body_amp = between(c.body_amplitude_min, c.body_amplitude_max);
  const double body_tau = between(c.body_delay_min_s, c.body_delay_max_s);

  const auto freqs = subcarrier_frequencies(c);
  const std::size_t ns = c.n_subcarriers, nt = c.n_timesteps;
  Array<float> amplitude({c.n_antennas, ns, nt});
  std::vector<Path> paths(c.path_amplitudes.size() + 1);
  for (std::size_t a = 0; a < c.n_antennas; ++a) {
    const double offset = c.antenna_delay_step_s * double(a);
    for (std::size_t n = 0; n < c.path_amplitudes.size(); ++n) {
      const double tau = c.path_delays_s[n] + offset + c.delay_jitter_s * normal(rng);
      paths[n] = {c.path_amplitudes[n], std::vector<double>(nt, tau), {}};
    }
    Path& body = paths.back();
    body.amplitude = body_amp;
    body.delay_s.resize(nt);
    body.gain = moving.gain;
    for (std::size_t t = 0; t < nt; ++t) body.delay_s[t] = body_tau + offset + moving.delay_s[t];
    const auto clean = cfr_amplitude(freqs, paths, nt);
    // Circular complex noise is rotation invariant, so |H + n| has the law
    // of ||H| + n|.
    for (std::size_t k = 0; k < ns * nt; ++k) {
      const std::complex<double> h(clean[k] + c.noise_std * normal(rng), c.noise_std * normal(rng));
      amplitude[a * ns * nt + k] = static_cast<float>(std::abs(h));
    }
  }
  return {std::move(amplitude), label};
}

DatasetSplit generate_synthetic(const SyntheticChannelConfig& config, SyntheticSizes sizes, std::size_t n_classes) {
  config.validate(n_classes);
  DatasetSplit split;
  split.dims = {config.n_antennas, config.n_subcarriers, config.n_timesteps};
  split.classes.clear();
  for (std::size_t k = 0; k < n_classes; ++k) {
    split.classes.emplace_back(n_classes == kActivityNames.size() ? std::string(kActivityNames[k])
                                                                  : fmt::format("class {}", k));
  }
  const std::size_t counts[] = {sizes.train, sizes.val, sizes.test};
  std::vector<CsiSample>* parts[] = {&split.train, &split.val, &split.test};
  for (std::size_t p = 0; p < 3; ++p) {
    parts[p]->reserve(counts[p]);
    for (std::size_t k = 0; k < counts[p]; ++k) {
      parts[p]->push_back(synthetic_sample(config, static_cast<int>(k % n_classes), p, k));
    }
  }
  return split;
}

}  // namespace rscnet::data
