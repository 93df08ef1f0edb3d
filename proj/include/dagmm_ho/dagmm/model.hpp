#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dagmm_ho/dagmm/gmm.hpp"
#include "dagmm_ho/dagmm/network.hpp"
#include "dagmm_ho/dagmm/objective.hpp"
#include "dagmm_ho/features/log_mel.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/rng.hpp"

namespace dagmm_ho {

inline Matrix as_row(std::span<const double> v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.row(0).begin());
  return m;
}

/// z_c = f(x; theta_enc).
inline Vector encode(std::span<const double> x, const NetworkArchitecture& arch, const ModelParameters& params) {
  if (x.size() != arch.input_dim) throw DimensionError("encode: input length differs from architecture input_dim");
  const ParameterLayout layout(arch);
  const auto acts = stack_forward(layout.encoder, params.values, as_row(x));
  return {acts.back().data().begin(), acts.back().data().end()};
}

/// x' = g(z_c; theta_dec).
inline Vector decode(std::span<const double> code, const NetworkArchitecture& arch, const ModelParameters& params) {
  if (code.size() != arch.bottleneck) throw DimensionError("decode: code length differs from bottleneck");
  const ParameterLayout layout(arch);
  const auto acts = stack_forward(layout.decoder, params.values, as_row(code));
  return {acts.back().data().begin(), acts.back().data().end()};
}

/// gamma = softmax(MLN(z; theta_est)); inverted dropout only in train mode.
inline Vector membership(std::span<const double> z, const NetworkArchitecture& arch, const ModelParameters& params,
                         bool train_mode, RngSeed seed) {
  if (z.size() != arch.latent_dim()) throw DimensionError("membership: latent length differs from c + 1");
  const ParameterLayout layout(arch);
  DropoutMasks masks;
  if (train_mode) {
    Rng rng(seed);
    masks = draw_dropout_masks(arch, 1, rng);
  }
  const Matrix gamma = estimate_membership(layout, params, as_row(z), masks);
  return {gamma.data().begin(), gamma.data().end()};
}

struct TrainingTrace {
  std::vector<double> epoch_loss;  // mean minibatch J per epoch
  double initial_objective = 0.0;  // full-set eval-mode J before the first update
  double final_objective = 0.0;    // full-set eval-mode J after the last update
};

/// A trained detector. Immutable once built; scoring uses the frozen mixture.
struct TrainedModel {
  NetworkArchitecture architecture;
  ModelParameters params;
  GmmParameters gmm;
  FeatureConfig features;
  Standardization stats;
  double eta = 0.0;
  TrainConfig config;
  TrainingTrace trace;

  /// Cholesky factors of the frozen covariances (derived, not persisted).
  std::vector<GaussianFactor> factors;

  void refresh_factors() { factors = factorize_all(gmm, config.jitter); }
};

/// Latent rows z = [z_c, z_r] for every feature row (no dropout).
inline Matrix latent_rows(const NetworkArchitecture& arch, const ModelParameters& params, const Matrix& x) {
  const ParameterLayout layout(arch);
  return compress(layout, params, x).z;
}

/// Full-pass mixture estimate over every row, used to freeze the GMM.
inline GmmParameters freeze_gmm(const NetworkArchitecture& arch, const ModelParameters& params, const Matrix& x) {
  const ParameterLayout layout(arch);
  const Matrix z = compress(layout, params, x).z;
  const Matrix gamma = estimate_membership(layout, params, z, {});
  return estimate_gmm(z, gamma).gmm;
}

/// Per-row sample energy under the model's frozen mixture.
inline Vector score(const TrainedModel& model, const Matrix& standardized_rows) {
  if (standardized_rows.cols() != model.architecture.input_dim)
    throw DimensionError("score: features have " + std::to_string(standardized_rows.cols()) +
                         " columns, model expects " + std::to_string(model.architecture.input_dim));
  const Matrix z = latent_rows(model.architecture, model.params, standardized_rows);
  const auto& factors = model.factors.empty() ? factorize_all(model.gmm, model.config.jitter) : model.factors;
  Vector energies(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) energies[i] = sample_energy(z.row(i), model.gmm, factors);
  return energies;
}

inline Vector score(const TrainedModel& model, const FeatureMatrix& features) {
  if (features.dims() != model.architecture.input_dim)
    throw DimensionError("score: features have " + std::to_string(features.dims()) + " columns, model expects " +
                         std::to_string(model.architecture.input_dim));
  return score(model, features.frames);
}

/// Linear-interpolated percentile (the (n-1)p/100 order-statistic rule).
inline double percentile(Vector values, double pct) {
  if (values.empty()) throw InputError("percentile: no values");
  if (!(pct > 0.0 && pct <= 100.0)) throw ParameterError("percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Energy threshold eta: the given percentile of training energies.
inline double choose_threshold(const Vector& train_energies, double pct = 99.0) { return percentile(train_energies, pct); }

}  // namespace dagmm_ho
