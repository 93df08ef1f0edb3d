#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "dagmm_ho/features/wav.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/matrix.hpp"

namespace dagmm_ho {

struct FeatureConfig {
  std::size_t frame_size = 1024;
  std::size_t hop_size = 512;
  std::size_t n_mels = 64;
  std::size_t input_dim = 64;
  double log_floor = 1e-10;

  void validate() const {
    if (frame_size < 2 || !std::has_single_bit(frame_size))
      throw ParameterError("feature config: frame_size must be a power of two");
    if (hop_size == 0 || hop_size > frame_size) throw ParameterError("feature config: hop_size must be in [1, frame_size]");
    if (n_mels == 0) throw ParameterError("feature config: n_mels must be at least 1");
    if (input_dim == 0 || input_dim > n_mels) throw ParameterError("feature config: input_dim must be in [1, n_mels]");
    if (!(log_floor > 0.0)) throw ParameterError("feature config: log_floor must be positive");
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

inline std::size_t frame_count(std::size_t length, const FeatureConfig& cfg) {
  if (length < cfg.frame_size) return 0;
  return (length - cfg.frame_size) / cfg.hop_size + 1;
}

/// In-place iterative radix-2 FFT. Size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!std::has_single_bit(n)) throw ParameterError("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, angle * static_cast<double>(k));
        const std::complex<double> u = a[start + k];
        const std::complex<double> v = a[start + k + len / 2] * w;
        a[start + k] = u + v;
        a[start + k + len / 2] = u - v;
      }
    }
  }
}

/// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

/// |FFT(hann * frame)|^2 per frame; frames x (frame_size/2 + 1). A trailing
/// partial frame is dropped.
inline Matrix stft_power(const AudioClip& clip, const FeatureConfig& cfg) {
  cfg.validate();
  if (clip.samples.size() < cfg.frame_size)
    throw InputError("stft_power: clip has " + std::to_string(clip.samples.size()) + " samples, fewer than frame_size " +
                     std::to_string(cfg.frame_size));
  const std::size_t frames = frame_count(clip.samples.size(), cfg);
  const std::size_t bins = cfg.frame_size / 2 + 1;
  const std::vector<double> window = hann_window(cfg.frame_size);
  Matrix power(frames, bins);
  std::vector<std::complex<double>> buf(cfg.frame_size);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t offset = t * cfg.hop_size;
    for (std::size_t i = 0; i < cfg.frame_size; ++i) buf[i] = {clip.samples[offset + i] * window[i], 0.0};
    fft(buf);
    for (std::size_t b = 0; b < bins; ++b) power(t, b) = std::norm(buf[b]);
  }
  return power;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Center frequencies (Hz) of the triangular filters; n_mels + 2 mel-spaced
/// edges from 0 Hz to Nyquist, with the interior points as centers.
inline std::vector<double> mel_edge_frequencies(std::size_t n_mels, double sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  return edges;
}

/// Triangular mel filterbank, n_mels x (frame_size/2 + 1). A filter narrower
/// than one FFT bin puts unit weight on the bin nearest its center.
inline Matrix mel_filterbank(const FeatureConfig& cfg, double sample_rate) {
  if (cfg.n_mels == 0) throw ParameterError("mel_filterbank: n_mels must be at least 1");
  if (!(sample_rate > 0.0)) throw ParameterError("mel_filterbank: sample rate must be positive");
  const std::size_t bins = cfg.frame_size / 2 + 1;
  const double bin_hz = sample_rate / static_cast<double>(cfg.frame_size);
  const std::vector<double> edges = mel_edge_frequencies(cfg.n_mels, sample_rate);
  Matrix bank(cfg.n_mels, bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m];
    const double center = edges[m + 1];
    const double hi = edges[m + 2];
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      bank(m, b) = w;
      total += w;
    }
    if (total <= 0.0) {
      const auto nearest = static_cast<std::size_t>(std::lround(center / bin_hz));
      bank(m, std::min(nearest, bins - 1)) = 1.0;
    }
  }
  return bank;
}

namespace detail {

inline Matrix log_mel_from_power(const Matrix& power, const Matrix& bank, const FeatureConfig& cfg) {
  Matrix out(power.rows(), cfg.input_dim);
  for (std::size_t t = 0; t < power.rows(); ++t) {
    auto frame = power.row(t);
    for (std::size_t m = 0; m < cfg.input_dim; ++m) {
      const double energy = dot(bank.row(m), frame);
      out(t, m) = std::log(std::max(energy, cfg.log_floor));
    }
  }
  return out;
}

}  // namespace detail

}  // namespace dagmm_ho
