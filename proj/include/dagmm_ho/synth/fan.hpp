#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dagmm_ho/features/wav.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/rng.hpp"

namespace dagmm_ho {

/// Harmonic fan hum: sum_h a_h sin(h * phase(t) + p_h), scaled by a slow
/// amplitude modulation, plus low-passed uniform noise. Operating conditions
/// wander slowly: the rotation speed by up to +-speed_drift (relative) and the
/// harmonic level by up to +-load_variation (relative).
struct FanProfile {
  double fundamental = 100.0;  // Hz
  std::vector<double> harmonics{0.2, 0.1, 0.05};  // amplitude of h = 1, 2, ...
  double noise_level = 0.05;   // peak amplitude of the noise component
  double noise_cutoff = 2000.0;  // Hz, one-pole low-pass
  double am_rate = 0.5;        // Hz
  double am_depth = 0.1;
  double speed_drift = 0.0;
  double load_variation = 0.0;

  /// Upper bound on |sample|.
  double peak_bound() const {
    double a = 0.0;
    for (double h : harmonics) a += std::abs(h);
    return (1.0 + am_depth) * (1.0 + load_variation) * a + noise_level;
  }

  void validate(std::uint32_t sample_rate) const {
    if (!(fundamental > 20.0) || !(fundamental < sample_rate / 4.0))
      throw ParameterError("fan profile: fundamental must lie in (20, sample_rate/4)");
    if (harmonics.empty()) throw ParameterError("fan profile: at least one harmonic required");
    if (noise_level < 0.0 || am_depth < 0.0 || am_depth >= 1.0 || am_rate < 0.0)
      throw ParameterError("fan profile: noise level, AM rate >= 0 and AM depth in [0, 1) required");
    if (speed_drift < 0.0 || speed_drift >= 0.5 || load_variation < 0.0 || load_variation >= 1.0)
      throw ParameterError("fan profile: need speed_drift in [0, 0.5) and load_variation in [0, 1)");
    if (fundamental * (1.0 + speed_drift) >= sample_rate / 4.0)
      throw ParameterError("fan profile: drifted fundamental reaches sample_rate/4");
    if (!(noise_cutoff > 0.0)) throw ParameterError("fan profile: noise cutoff must be positive");
    if (!(peak_bound() < 1.0)) throw ParameterError("fan profile: amplitudes would clip (peak bound >= 1)");
  }
};

inline AudioClip generate_fan(const FanProfile& profile, double duration, std::uint32_t sample_rate, RngSeed seed) {
  if (sample_rate == 0) throw ParameterError("generate_fan: sample rate must be positive");
  if (!(duration >= 1.0)) throw ParameterError("generate_fan: duration must be at least 1 s");
  profile.validate(sample_rate);
  Rng rng(seed);
  std::vector<double> phases(profile.harmonics.size());
  for (double& p : phases) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  // slow wander in [-1, 1]: two incommensurate sinusoids per condition
  struct Wander {
    double r1, r2, p1, p2;
    double at(double t) const {
      return 0.6 * std::sin(2.0 * std::numbers::pi * r1 * t + p1) + 0.4 * std::sin(2.0 * std::numbers::pi * r2 * t + p2);
    }
  };
  const auto wander = [&rng] {
    return Wander{rng.uniform(0.02, 0.06), rng.uniform(0.1, 0.25), rng.uniform(0.0, 2.0 * std::numbers::pi),
                  rng.uniform(0.0, 2.0 * std::numbers::pi)};
  };
  const Wander speed = wander();
  const Wander load = wander();

  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  const double nyquist = sample_rate / 2.0;
  // one-pole coefficient; keeps |noise| <= 1 because each output is a convex combination
  const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * std::min(profile.noise_cutoff, nyquist) / sample_rate);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(n);
  double noise = 0.0;
  double phase = 0.0;  // fundamental phase, radians
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f0 = profile.fundamental * (1.0 + profile.speed_drift * speed.at(t));
    double tone = 0.0;
    for (std::size_t h = 0; h < profile.harmonics.size(); ++h) {
      if (f0 * static_cast<double>(h + 1) >= nyquist) break;
      tone += profile.harmonics[h] * std::sin(static_cast<double>(h + 1) * phase + phases[h]);
    }
    const double am = (1.0 + profile.am_depth * std::sin(2.0 * std::numbers::pi * profile.am_rate * t + am_phase)) *
                      (1.0 + profile.load_variation * load.at(t));
    noise += alpha * (rng.uniform(-1.0, 1.0) - noise);
    clip.samples[i] = am * tone + profile.noise_level * noise;
    phase = std::fmod(phase + 2.0 * std::numbers::pi * f0 / sample_rate, 2.0 * std::numbers::pi);
  }
  return clip;
}

enum class AnomalyKind { added_tone, amplitude_drop, noise_burst, harmonic_shift };

inline const char* to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::added_tone: return "added_tone";
    case AnomalyKind::amplitude_drop: return "amplitude_drop";
    case AnomalyKind::noise_burst: return "noise_burst";
    case AnomalyKind::harmonic_shift: return "harmonic_shift";
  }
  return "?";
}

inline AnomalyKind parse_anomaly_kind(const std::string& s) {
  for (auto k : {AnomalyKind::added_tone, AnomalyKind::amplitude_drop, AnomalyKind::noise_burst, AnomalyKind::harmonic_shift})
    if (s == to_string(k)) return k;
  throw ParameterError("unknown anomaly kind '" + s + "'");
}

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::added_tone;
  double onset = 0.0;     // seconds
  double duration = 1.0;  // seconds
  double severity = 1.0;  // (0, 1]
  double tone_frequency = 3000.0;  // Hz, added_tone only
};

// Full-severity magnitudes of each perturbation.
inline constexpr double kToneAmplitude = 0.3;
inline constexpr double kDropFraction = 0.8;
inline constexpr double kBurstAmplitude = 0.3;
inline constexpr double kShiftFraction = 0.1;

/// Applies `spec` over [onset, onset + duration). Samples outside the window
/// are copied unchanged; results are clamped to [-1, 1].
inline AudioClip inject_anomaly(const AudioClip& clip, const AnomalySpec& spec, RngSeed seed) {
  if (!(spec.onset >= 0.0) || !(spec.duration > 0.0) ||
      spec.onset + spec.duration > clip.duration_seconds() + 1e-9)
    throw ParameterError("inject_anomaly: window must lie inside the clip");
  if (!(spec.severity > 0.0) || spec.severity > 1.0) throw ParameterError("inject_anomaly: severity must be in (0, 1]");
  if (spec.kind == AnomalyKind::added_tone && !(spec.tone_frequency > 0.0 && spec.tone_frequency < clip.sample_rate / 2.0))
    throw ParameterError("inject_anomaly: tone frequency must lie in (0, Nyquist)");

  const double sr = clip.sample_rate;
  const auto begin = static_cast<std::size_t>(std::llround(spec.onset * sr));
  const auto end = std::min(clip.samples.size(), static_cast<std::size_t>(std::llround((spec.onset + spec.duration) * sr)));
  AudioClip out = clip;
  Rng rng(seed);
  const double s = spec.severity;
  for (std::size_t i = begin; i < end; ++i) {
    const double t = static_cast<double>(i - begin) / sr;
    double v = clip.samples[i];
    switch (spec.kind) {
      case AnomalyKind::added_tone:
        v += s * kToneAmplitude * std::sin(2.0 * std::numbers::pi * spec.tone_frequency * t);
        break;
      case AnomalyKind::amplitude_drop:
        v *= 1.0 - s * kDropFraction;
        break;
      case AnomalyKind::noise_burst:
        v += s * kBurstAmplitude * rng.uniform(-1.0, 1.0);
        break;
      case AnomalyKind::harmonic_shift: {
        // time-compress the window by (1 + shift): every frequency moves up
        const double pos = static_cast<double>(begin) + static_cast<double>(i - begin) * (1.0 + s * kShiftFraction);
        const auto j = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(j);
        const std::size_t last = clip.samples.size() - 1;
        const double a = clip.samples[std::min(j, last)];
        const double b = clip.samples[std::min(j + 1, last)];
        v = a + frac * (b - a);
        break;
      }
    }
    out.samples[i] = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

/// Six hand-tuned profiles; pairs (0, 1) and (2, 3) are acoustically close.
/// Counts above six extend the list with derived profiles.
inline std::vector<FanProfile> default_profiles(std::size_t count) {
  std::vector<FanProfile> base{
      {100.0, {0.20, 0.10, 0.06, 0.03}, 0.04, 1500.0, 0.5, 0.10, 0.02, 0.25},
      {110.0, {0.20, 0.09, 0.07, 0.03}, 0.04, 1600.0, 0.7, 0.10, 0.02, 0.25},
      {150.0, {0.18, 0.12, 0.04, 0.04}, 0.05, 2500.0, 0.4, 0.08, 0.02, 0.25},
      {160.0, {0.18, 0.11, 0.05, 0.04}, 0.05, 2400.0, 0.6, 0.08, 0.02, 0.25},
      {220.0, {0.15, 0.15, 0.08, 0.02}, 0.06, 3500.0, 0.3, 0.12, 0.02, 0.25},
      {300.0, {0.22, 0.05, 0.08, 0.05}, 0.03, 1200.0, 0.8, 0.06, 0.02, 0.25},
  };
  std::vector<FanProfile> out;
  for (std::size_t i = 0; i < count; ++i) {
    FanProfile p = base[i % base.size()];
    p.fundamental *= std::pow(1.07, static_cast<double>(i / base.size()));
    out.push_back(p);
  }
  return out;
}

}  // namespace dagmm_ho
