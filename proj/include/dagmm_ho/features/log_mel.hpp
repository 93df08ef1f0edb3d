#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "dagmm_ho/features/spectrogram.hpp"
#include "dagmm_ho/features/wav.hpp"
#include "dagmm_ho/numcore/binary_io.hpp"
#include "dagmm_ho/numcore/matrix.hpp"

namespace dagmm_ho {

/// Per-dimension z-score statistics, fitted on training features only.
struct Standardization {
  Vector mean;
  Vector stddev;

  static Standardization identity(std::size_t dims) { return {Vector(dims, 0.0), Vector(dims, 1.0)}; }

  std::size_t dims() const { return mean.size(); }

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

inline constexpr double kMinVariance = 1e-12;

struct FeatureMatrix {
  Matrix frames;  // N x D
  FeatureConfig config;
  Standardization stats;  // identity until standardized

  std::size_t rows() const { return frames.rows(); }
  std::size_t dims() const { return frames.cols(); }
};

/// Unstandardized log-mel features of one clip: log(max(mel . power, floor))
/// for the lowest `input_dim` bands.
inline FeatureMatrix log_mel(const AudioClip& clip, const FeatureConfig& cfg) {
  const Matrix power = stft_power(clip, cfg);
  const Matrix bank = mel_filterbank(cfg, static_cast<double>(clip.sample_rate));
  return {detail::log_mel_from_power(power, bank, cfg), cfg, Standardization::identity(cfg.input_dim)};
}

inline Standardization fit_standardization(const Matrix& frames) {
  if (frames.rows() == 0) throw InputError("fit_standardization: no frames");
  Standardization s{column_means(frames), Vector(frames.cols(), 0.0)};
  for (std::size_t r = 0; r < frames.rows(); ++r)
    for (std::size_t c = 0; c < frames.cols(); ++c) {
      const double d = frames(r, c) - s.mean[c];
      s.stddev[c] += d * d;
    }
  for (double& v : s.stddev) v = std::sqrt(std::max(v / static_cast<double>(frames.rows()), kMinVariance));
  return s;
}

/// Applies `stats` to raw (unstandardized) features. Columns whose training
/// variance hit the floor map to 0.
inline FeatureMatrix standardize(const FeatureMatrix& raw, const Standardization& stats) {
  if (stats.dims() != raw.dims()) throw DimensionError("standardize: statistics dimension differs from features");
  FeatureMatrix out{raw.frames, raw.config, stats};
  const double min_stddev = std::sqrt(kMinVariance);
  for (std::size_t r = 0; r < out.frames.rows(); ++r)
    for (std::size_t c = 0; c < out.frames.cols(); ++c)
      out.frames(r, c) =
          stats.stddev[c] <= min_stddev ? 0.0 : (out.frames(r, c) - stats.mean[c]) / stats.stddev[c];
  return out;
}

/// Fits statistics on `raw` and applies them.
inline FeatureMatrix standardize(const FeatureMatrix& raw) { return standardize(raw, fit_standardization(raw.frames)); }

// Feature cache: "DGHF", u32 version, u32 N, u32 D, N*D f64 row-major,
// D f64 means, D f64 standard deviations. Little-endian.
inline constexpr std::uint32_t kFeatureCacheVersion = 1;

inline std::vector<char> encode_feature_cache(const FeatureMatrix& features) {
  ByteWriter out;
  out.bytes("DGHF");
  out.u32(kFeatureCacheVersion);
  out.u32(static_cast<std::uint32_t>(features.rows()));
  out.u32(static_cast<std::uint32_t>(features.dims()));
  out.f64s(features.frames.data());
  const Standardization stats =
      features.stats.dims() == features.dims() ? features.stats : Standardization::identity(features.dims());
  out.f64s(stats.mean);
  out.f64s(stats.stddev);
  return out.buffer();
}

inline FeatureMatrix decode_feature_cache(std::vector<char> bytes) {
  ByteReader in(std::move(bytes));
  if (in.bytes(4) != "DGHF") throw FormatError("feature cache: bad magic");
  const std::uint32_t version = in.u32();
  if (version != kFeatureCacheVersion)
    throw VersionError("feature cache: version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kFeatureCacheVersion) + ")");
  const std::uint32_t n = in.u32();
  const std::uint32_t d = in.u32();
  FeatureMatrix out;
  out.frames = Matrix(n, d);
  out.frames.data() = in.f64s(static_cast<std::size_t>(n) * d);
  out.stats.mean = in.f64s(d);
  out.stats.stddev = in.f64s(d);
  if (!in.at_end()) throw FormatError("feature cache: trailing bytes");
  out.config.input_dim = d;
  out.config.n_mels = std::max<std::size_t>(out.config.n_mels, d);
  return out;
}

inline void save_feature_cache(const std::filesystem::path& path, const FeatureMatrix& features) {
  write_file_atomic(path, encode_feature_cache(features));
}

inline FeatureMatrix load_feature_cache(const std::filesystem::path& path) {
  return decode_feature_cache(read_file_bytes(path));
}

}  // namespace dagmm_ho
