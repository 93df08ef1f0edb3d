#pragma once

#include <algorithm>
#include <cmath>

#include "dagmm_ho/features/log_mel.hpp"
#include "dagmm_ho/hpo/bending_point.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/linalg.hpp"
#include "dagmm_ho/numcore/matrix.hpp"

namespace dagmm_ho {

struct VarianceCurve {
  Curve curve;          // x = 1..D, y = cumulative variance ratio
  Vector eigenvalues;   // descending, clamped at 0
  Vector ratios;
};

/// PCA cumulative variance ratio of the centered data.
inline VarianceCurve variance_ratio_curve(const Matrix& data) {
  if (data.rows() < 2 || data.cols() < 2) throw InputError("variance curve: need at least 2 rows and 2 columns");
  require_finite(data, "variance curve");
  const auto eig = eigendecompose_symmetric(covariance(data));
  VarianceCurve v;
  v.curve.kind = CurveKind::variance;
  double total = 0.0;
  for (double e : eig.values) {
    v.eigenvalues.push_back(std::max(e, 0.0));
    total += v.eigenvalues.back();
  }
  if (!(total > 0.0)) throw DegenerateInputError("variance curve: data has zero total variance");
  double acc = 0.0;
  for (std::size_t i = 0; i < v.eigenvalues.size(); ++i) {
    v.ratios.push_back(v.eigenvalues[i] / total);
    acc += v.ratios.back();
    v.curve.x.push_back(static_cast<double>(i + 1));
    v.curve.y.push_back(std::min(acc, 1.0));
  }
  v.curve.y.back() = 1.0;
  return v;
}

struct CSelection {
  std::size_t c = 1;
  bool fallback = false;
  VarianceCurve variance;
  BendingPointResult bending;
};

inline constexpr double kVarianceFallbackRatio = 0.95;

/// Bottleneck size from the knee of the variance curve, clamped to
/// [1, D-1]; without a knee (or with D = 2), the first dimension reaching
/// 95% of the variance.
inline CSelection select_c(const Matrix& data, const BendingPointOptions& opts = {}) {
  CSelection s;
  s.variance = variance_ratio_curve(data);
  const std::size_t d = data.cols();
  if (s.variance.curve.size() >= 3) s.bending = bending_point(s.variance.curve, opts);
  long c = 0;
  if (s.bending.found()) {
    c = round_half_up(*s.bending.x_star);
  } else {
    s.fallback = true;
    const auto& y = s.variance.curve.y;
    const auto it = std::find_if(y.begin(), y.end(), [](double v) { return v >= kVarianceFallbackRatio; });
    c = static_cast<long>(it - y.begin()) + 1;
  }
  s.c = static_cast<std::size_t>(std::clamp<long>(c, 1, static_cast<long>(d) - 1));
  return s;
}

inline CSelection select_c(const FeatureMatrix& features, const BendingPointOptions& opts = {}) {
  return select_c(features.frames, opts);
}

}  // namespace dagmm_ho
