#pragma once

#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "dagmm_ho/features/segments.hpp"
#include "dagmm_ho/features/wav.hpp"
#include "dagmm_ho/synth/fan.hpp"

namespace dagmm_ho {

struct FixtureConfig {
  std::size_t fans = 6;
  double duration = 60.0;  // seconds per fan
  std::uint32_t sample_rate = 16000;
  std::size_t anomalies_per_fan = 10;
  double segment_seconds = 1.0;
  double min_severity = 0.3;
  double max_severity = 1.0;
  RngSeed seed{42};

  std::size_t segments_per_fan() const { return static_cast<std::size_t>(duration / segment_seconds + 1e-9); }

  void validate() const {
    if (fans == 0) throw ParameterError("fixture: at least one fan required");
    if (!(segment_seconds > 0.0) || !(duration >= 1.0) || !(duration >= segment_seconds))
      throw ParameterError("fixture: need duration >= max(1 s, segment length) and a positive segment length");
    if (anomalies_per_fan > segments_per_fan())
      throw ParameterError("fixture: more anomalies than segments per fan");
    if (!(min_severity > 0.0) || !(max_severity <= 1.0) || min_severity > max_severity)
      throw ParameterError("fixture: need 0 < min_severity <= max_severity <= 1");
  }
};

struct FixtureClip {
  std::string file;
  AudioClip clip;
  std::vector<AnomalySpec> anomalies;
};

struct Fixture {
  std::vector<FixtureClip> clips;
  std::vector<Segment> segments;
};

inline std::string fan_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fan_%02zu.wav", i);
  return buf;
}

/// Fans with anomalies planted on whole segments, kinds cycling through the
/// four perturbations from a seeded offset.
inline Fixture build_fixture(const FixtureConfig& cfg) {
  cfg.validate();
  const auto profiles = default_profiles(cfg.fans);
  const std::size_t n_segments = cfg.segments_per_fan();
  Fixture fx;
  for (std::size_t f = 0; f < cfg.fans; ++f) {
    const RngSeed fan_seed = derive_seed(cfg.seed, f);
    FixtureClip fc;
    fc.file = fan_file_name(f);
    fc.clip = generate_fan(profiles[f], cfg.duration, cfg.sample_rate, derive_seed(fan_seed, 0));

    Rng rng(derive_seed(fan_seed, 1));
    std::vector<std::size_t> order(n_segments);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<bool> anomalous(n_segments, false);
    std::vector<std::string> kinds(n_segments, "-");
    const std::size_t kind_offset = rng.uniform_index(4);
    for (std::size_t a = 0; a < cfg.anomalies_per_fan; ++a) {
      AnomalySpec spec;
      spec.kind = static_cast<AnomalyKind>((kind_offset + a) % 4);
      spec.onset = static_cast<double>(order[a]) * cfg.segment_seconds;
      spec.duration = cfg.segment_seconds;
      spec.severity = rng.uniform(cfg.min_severity, cfg.max_severity);
      spec.tone_frequency = rng.uniform(1000.0, 6000.0);
      fc.clip = inject_anomaly(fc.clip, spec, derive_seed(fan_seed, 100 + a));
      fc.anomalies.push_back(spec);
      anomalous[order[a]] = true;
      kinds[order[a]] = to_string(spec.kind);
    }
    for (std::size_t s = 0; s < n_segments; ++s)
      fx.segments.push_back({fc.file, static_cast<double>(s) * cfg.segment_seconds,
                             static_cast<double>(s + 1) * cfg.segment_seconds, anomalous[s], kinds[s]});
    fx.clips.push_back(std::move(fc));
  }
  return fx;
}

inline constexpr const char* kManifestName = "manifest.txt";

/// Writes fan WAVs and the manifest into `dir`; returns the manifest path.
inline std::filesystem::path write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& c : fx.clips) save_wav(dir / c.file, c.clip);
  const auto manifest = dir / kManifestName;
  save_manifest(manifest, fx.segments);
  return manifest;
}

}  // namespace dagmm_ho
