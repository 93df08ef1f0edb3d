#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <span>
#include <vector>

#include "dagmm_ho/hpo/bending_point.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/kmeans.hpp"
#include "dagmm_ho/numcore/matrix.hpp"
#include "dagmm_ho/numcore/rng.hpp"

namespace dagmm_ho {

struct GapConfig {
  std::size_t k_min = 1;
  std::size_t k_max = 10;
  std::size_t reference_draws = 10;  // B
  RngSeed seed{42};
  // A knee is kept only if G rises from k_min to the knee by more than this
  // many mean reference standard errors. 0 disables the check.
  double rise_tolerance = 8.0;
  KMeansOptions kmeans{};
  BendingPointOptions bending{};

  void validate() const {
    if (k_min < 1 || k_min >= k_max) throw ParameterError("gap: need 1 <= k_min < k_max");
    if (reference_draws < 1) throw ParameterError("gap: reference_draws must be >= 1");
    if (!(rise_tolerance >= 0.0)) throw ParameterError("gap: rise_tolerance must be >= 0");
  }

  friend bool operator==(const GapConfig& a, const GapConfig& b) {
    return a.k_min == b.k_min && a.k_max == b.k_max && a.reference_draws == b.reference_draws &&
           a.seed.value == b.seed.value && a.rise_tolerance == b.rise_tolerance &&
           a.bending.smooth == b.bending.smooth;
  }
};

/// Within-cluster dispersion: sum over clusters of (1/(2 n_k)) times the sum
/// of squared pairwise distances, computed as the sum of squared distances to
/// each cluster mean (sum_{i,j} |x_i - x_j|^2 = 2 n_k sum_i |x_i - mean_k|^2).
inline double dispersion(const Matrix& data, std::span<const std::size_t> labels, std::size_t k) {
  if (labels.size() != data.rows()) throw DimensionError("dispersion: one label per row required");
  const std::size_t d = data.cols();
  std::vector<Vector> sums(k, Vector(d, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    if (labels[r] >= k) throw ParameterError("dispersion: label out of range");
    ++counts[labels[r]];
    for (std::size_t c = 0; c < d; ++c) sums[labels[r]][c] += data(r, c);
  }
  for (std::size_t j = 0; j < k; ++j)
    if (counts[j] > 0)
      for (double& v : sums[j]) v /= static_cast<double>(counts[j]);
  double total = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto& mean = sums[labels[r]];
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = data(r, c) - mean[c];
      total += diff * diff;
    }
  }
  return total;
}

/// n rows drawn uniformly per dimension over the bounding box of `data`.
inline Matrix uniform_reference(const Matrix& data, RngSeed seed) {
  Vector lo(data.cols(), 0.0), hi(data.cols(), 0.0);
  for (std::size_t c = 0; c < data.cols(); ++c) {
    lo[c] = hi[c] = data(0, c);
    for (std::size_t r = 1; r < data.rows(); ++r) {
      lo[c] = std::min(lo[c], data(r, c));
      hi[c] = std::max(hi[c], data(r, c));
    }
  }
  Rng rng(seed);
  Matrix out(data.rows(), data.cols());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = rng.uniform(lo[c], hi[c]);
  return out;
}

struct GapPoint {
  std::size_t k = 0;
  double gap = 0.0;
  double log_observed = 0.0;
  double log_reference_mean = 0.0;
  double log_reference_sd = 0.0;
  double standard_error = 0.0;  // sd * sqrt(1 + 1/B)
};

namespace detail {

// Stream layout under cfg.seed: data clustering at k uses stream k, reference
// set b is drawn from stream 1000 + b and clustered with stream 2000 + 100 b + k.
inline RngSeed gap_data_seed(RngSeed s, std::size_t k) { return derive_seed(s, k); }
inline RngSeed gap_reference_seed(RngSeed s, std::size_t b) { return derive_seed(s, 1000 + b); }
inline RngSeed gap_reference_cluster_seed(RngSeed s, std::size_t b, std::size_t k) {
  return derive_seed(s, 2000 + 100 * b + k);
}

inline void require_gap_input(const Matrix& data, std::size_t k) {
  if (data.rows() == 0 || data.cols() == 0) throw InputError("gap: empty data");
  if (data.rows() < k) throw ParameterError("gap: fewer rows than clusters");
  require_finite(data, "gap");
}

inline GapPoint gap_point(const Matrix& data, const std::vector<Matrix>& references, std::size_t k,
                          const GapConfig& cfg) {
  GapPoint p;
  p.k = k;
  const KMeansResult km = kmeans(data, k, gap_data_seed(cfg.seed, k), cfg.kmeans);
  const double observed = dispersion(data, km.assignment, k);
  if (!(observed > 0.0))
    throw DegenerateInputError("gap: within-cluster dispersion is zero at k=" + std::to_string(k) +
                               " (identical points)");
  p.log_observed = std::log(observed);
  Vector logs;
  for (std::size_t b = 0; b < references.size(); ++b) {
    const KMeansResult rk = kmeans(references[b], k, gap_reference_cluster_seed(cfg.seed, b, k), cfg.kmeans);
    const double dr = dispersion(references[b], rk.assignment, k);
    if (!(dr > 0.0)) throw DegenerateInputError("gap: reference dispersion is zero (data has zero extent)");
    logs.push_back(std::log(dr));
  }
  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= static_cast<double>(logs.size());
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  p.log_reference_mean = mean;
  p.log_reference_sd = std::sqrt(var / static_cast<double>(logs.size()));
  p.standard_error = p.log_reference_sd * std::sqrt(1.0 + 1.0 / static_cast<double>(logs.size()));
  p.gap = mean - p.log_observed;
  return p;
}

inline std::vector<Matrix> draw_references(const Matrix& data, const GapConfig& cfg) {
  std::vector<Matrix> refs;
  for (std::size_t b = 0; b < cfg.reference_draws; ++b) refs.push_back(uniform_reference(data, gap_reference_seed(cfg.seed, b)));
  return refs;
}

}  // namespace detail

/// G_k = mean_b log D_r^(b)(k) - log D_o(k).
inline double gap_statistic(const Matrix& data, std::size_t k, const GapConfig& cfg) {
  cfg.validate();
  if (k < cfg.k_min || k > cfg.k_max) throw ParameterError("gap: k outside [k_min, k_max]");
  detail::require_gap_input(data, k);
  return detail::gap_point(data, detail::draw_references(data, cfg), k, cfg).gap;
}

struct KSelection {
  std::size_t k = 1;
  bool fallback = false;
  bool weak_knee = false;  // knee found but rejected by the rise check
  std::vector<GapPoint> points;
  Curve curve;
  BendingPointResult bending;
};

inline double mean_standard_error(const std::vector<GapPoint>& points) {
  double se = 0.0;
  for (const auto& p : points) se += p.standard_error;
  return points.empty() ? 0.0 : se / static_cast<double>(points.size());
}

/// Gap curve over [k_min, k_max]; K is its bending point, or k_min when
/// there is no knee or the knee is not a clear rise over G_{k_min}.
inline KSelection select_k(const Matrix& data, const GapConfig& cfg) {
  cfg.validate();
  detail::require_gap_input(data, cfg.k_max);
  const auto refs = detail::draw_references(data, cfg);
  KSelection s;
  s.curve.kind = CurveKind::gap;
  for (std::size_t k = cfg.k_min; k <= cfg.k_max; ++k) {
    s.points.push_back(detail::gap_point(data, refs, k, cfg));
    s.curve.x.push_back(static_cast<double>(k));
    s.curve.y.push_back(s.points.back().gap);
  }
  if (s.curve.size() >= 3) s.bending = bending_point(s.curve, cfg.bending);
  if (s.bending.found()) {
    const double rise = s.points[*s.bending.index].gap - s.points.front().gap;
    s.weak_knee = !(rise > cfg.rise_tolerance * mean_standard_error(s.points));
  }
  if (s.bending.found() && !s.weak_knee) {
    const long k = round_half_up(*s.bending.x_star);
    s.k = static_cast<std::size_t>(std::clamp<long>(k, static_cast<long>(cfg.k_min), static_cast<long>(cfg.k_max)));
  } else {
    s.k = cfg.k_min;
    s.fallback = true;
  }
  return s;
}

}  // namespace dagmm_ho
