#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dagmm_ho/dagmm/model.hpp"
#include "dagmm_ho/dagmm/objective.hpp"
#include "dagmm_ho/features/log_mel.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/rng.hpp"

namespace dagmm_ho {

/// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double learning_rate)
      : lr_(learning_rate), m_(size, 0.0), v_(size, 0.0) {}

  void step(Vector& params, const Vector& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEpsilon);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  Vector m_;
  Vector v_;
};

/// Training stopped on a non-finite objective or gradient. Carries the last
/// parameters for which every update was finite.
struct TrainingDivergedError : NumericError {
  TrainingDivergedError(const std::string& what, ModelParameters last_good, std::size_t epoch)
      : NumericError(what), last_good(std::move(last_good)), epoch(epoch) {}
  ModelParameters last_good;
  std::size_t epoch;
};

namespace detail {

// Eval-mode J with the mixture estimated from every row at once. Batch
// averages would depend on row order (e.g. files stacked one after another).
inline double eval_objective(const NetworkArchitecture& arch, const ModelParameters& params, const Matrix& x,
                             const TrainConfig& cfg) {
  return objective(arch, params, x, cfg).total;
}

}  // namespace detail

/// Joint minibatch training of the compression and estimation networks on
/// standardized features. Deterministic in (features, arch, cfg): parameter
/// init, shuffling and dropout each draw from their own derived seed. Trailing
/// rows that do not fill a batch are skipped for that epoch.
inline TrainedModel train(const FeatureMatrix& features, const NetworkArchitecture& arch, const TrainConfig& cfg) {
  arch.validate();
  cfg.validate();
  if (features.dims() != arch.input_dim)
    throw DimensionError("train: features have " + std::to_string(features.dims()) + " columns, architecture expects " +
                         std::to_string(arch.input_dim));
  if (features.rows() < cfg.batch_size)
    throw InputError("train: " + std::to_string(features.rows()) + " rows is fewer than batch_size " +
                     std::to_string(cfg.batch_size));
  require_finite(features.frames, "train");

  const Matrix& x = features.frames;
  TrainedModel model;
  model.architecture = arch;
  model.features = features.config;
  model.stats = features.stats;
  model.config = cfg;
  model.params = initialize_parameters(arch, derive_seed(cfg.seed, 0));

  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));
  AdamOptimizer adam(model.params.values.size(), cfg.learning_rate);

  model.trace.initial_objective = detail::eval_objective(arch, model.params, x, cfg);
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batches = x.rows() / cfg.batch_size;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size, cfg.batch_size);
      const Matrix batch = x.select_rows(idx);
      const DropoutMasks masks = draw_dropout_masks(arch, batch.rows(), dropout_rng);
      ObjectiveGradient g;
      try {
        g = objective_gradient(arch, model.params, batch, cfg, masks);
      } catch (const NumericError& e) {
        throw TrainingDivergedError(std::string("training diverged at epoch ") + std::to_string(epoch) + ": " + e.what(),
                                    model.params, epoch);
      }
      adam.step(model.params.values, g.gradient);
      epoch_total += g.terms.total;
    }
    model.trace.epoch_loss.push_back(epoch_total / static_cast<double>(batches));
  }
  model.trace.final_objective = detail::eval_objective(arch, model.params, x, cfg);

  model.gmm = freeze_gmm(arch, model.params, x);
  model.refresh_factors();
  model.eta = choose_threshold(score(model, x), 99.0);
  return model;
}

}  // namespace dagmm_ho
