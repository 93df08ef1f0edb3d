#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/matrix.hpp"

namespace dagmm_ho {

enum class CurveKind { gap, variance };

inline const char* to_string(CurveKind k) { return k == CurveKind::gap ? "gap" : "variance"; }

/// Ordered (x, y) samples with strictly increasing x and at least 3 points.
struct Curve {
  Vector x;
  Vector y;
  CurveKind kind = CurveKind::gap;

  std::size_t size() const { return x.size(); }

  void validate() const {
    if (x.size() != y.size()) throw DimensionError("curve: x and y lengths differ");
    if (x.size() < 3) throw ParameterError("curve: a bending point needs at least 3 points");
    for (std::size_t i = 1; i < x.size(); ++i)
      if (!(x[i] > x[i - 1])) throw ParameterError("curve: x must be strictly increasing");
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw NumericError("curve: non-finite point");
  }
};

struct LocalMaximum {
  std::size_t index = 0;
  double x = 0.0;       // normalized abscissa
  double y = 0.0;       // difference value
  double threshold = 0.0;
  bool confirmed = false;
};

struct BendingPointResult {
  std::optional<double> x_star;  // original-scale abscissa; empty = no knee
  std::optional<std::size_t> index;
  Vector x_normalized;
  Vector y_normalized;
  Vector x_difference;
  Vector y_difference;
  std::vector<LocalMaximum> maxima;

  bool found() const { return x_star.has_value(); }
};

struct BendingPointOptions {
  // Centered 3-point moving average on y (curves of 5+ points) before
  // normalizing. Off by default: on integer-indexed curves it moves sharp
  // knees by one position.
  bool smooth = false;
};

namespace detail {

inline Vector min_max_normalize(const Vector& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  Vector out(v.size(), 0.0);
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

inline Vector moving_average3(const Vector& y) {
  Vector out = y;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) out[i] = (y[i - 1] + y[i] + y[i + 1]) / 3.0;
  return out;
}

}  // namespace detail

/// Curve bending-point detection:
///   1. min-max normalize x and y to [0, 1];
///   2. difference curve y_d = y_n - x_n (x_d = x_n);
///   3. local maxima of y_d, strictly above both neighbours;
///   4. threshold T = y_lmx - mean(x_n[i+1] - x_n[i]) for each maximum;
///   5. scanning left to right, the first maximum whose following difference
///      values drop below T before the next maximum is the knee x*.
inline BendingPointResult bending_point(const Curve& curve, const BendingPointOptions& opts = {}) {
  curve.validate();
  const std::size_t m = curve.size();
  const Vector y = opts.smooth && m >= 5 ? detail::moving_average3(curve.y) : curve.y;

  BendingPointResult r;
  r.x_normalized = detail::min_max_normalize(curve.x);
  r.y_normalized = detail::min_max_normalize(y);
  r.x_difference = r.x_normalized;
  r.y_difference.resize(m);
  for (std::size_t i = 0; i < m; ++i) r.y_difference[i] = r.y_normalized[i] - r.x_normalized[i];

  double spacing = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i) spacing += r.x_normalized[i + 1] - r.x_normalized[i];
  spacing /= static_cast<double>(m - 1);

  const Vector& yd = r.y_difference;
  for (std::size_t i = 1; i + 1 < m; ++i)
    if (yd[i] > yd[i - 1] && yd[i] > yd[i + 1]) r.maxima.push_back({i, r.x_difference[i], yd[i], yd[i] - spacing, false});

  for (std::size_t q = 0; q < r.maxima.size(); ++q) {
    auto& lm = r.maxima[q];
    const std::size_t stop = q + 1 < r.maxima.size() ? r.maxima[q + 1].index : m;
    for (std::size_t j = lm.index + 1; j < stop; ++j) {
      if (yd[j] < lm.threshold) {
        lm.confirmed = true;
        break;
      }
    }
    if (lm.confirmed) {
      r.index = lm.index;
      r.x_star = curve.x[lm.index];
      break;
    }
  }
  return r;
}

/// Nearest integer, halves rounded up.
inline long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

}  // namespace dagmm_ho
