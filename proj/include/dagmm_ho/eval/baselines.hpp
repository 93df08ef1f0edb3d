#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <numbers>
#include <vector>

#include "dagmm_ho/dagmm/model.hpp"
#include "dagmm_ho/dagmm/trainer.hpp"
#include "dagmm_ho/features/log_mel.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/kmeans.hpp"
#include "dagmm_ho/numcore/linalg.hpp"
#include "dagmm_ho/numcore/matrix.hpp"
#include "dagmm_ho/numcore/rng.hpp"

namespace dagmm_ho {

// ---- diagonal-covariance GMM fitted by EM ----

struct EmOptions {
  double variance_floor = 1e-6;
  double tolerance = 1e-7;  // stop when the mean log-likelihood gains less
  std::size_t max_iterations = 500;
  KMeansOptions kmeans{};
};

struct DiagonalGmm {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Vector> variances;

  std::size_t components() const { return weights.size(); }
  std::size_t dims() const { return means.empty() ? 0 : means.front().size(); }
};

struct EmResult {
  DiagonalGmm model;
  Vector log_likelihood;  // mean per-row log-likelihood, one entry per E-step
  bool converged = false;
  std::vector<std::size_t> reinitialized;  // iterations that re-seeded an empty component
};

namespace detail {

inline double log_sum_exp(const Vector& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log(w_k N(x | mu_k, diag var_k)) for every component.
inline void component_log_joint(const DiagonalGmm& g, std::span<const double> x, Vector& out) {
  const std::size_t d = x.size();
  out.resize(g.components());
  for (std::size_t k = 0; k < g.components(); ++k) {
    double acc = std::log(g.weights[k]) - 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x[j] - g.means[k][j];
      acc -= 0.5 * (std::log(g.variances[k][j]) + diff * diff / g.variances[k][j]);
    }
    out[k] = acc;
  }
}

}  // namespace detail

/// Per-row log density under the mixture.
inline Vector gmm_log_density(const DiagonalGmm& g, const Matrix& x) {
  if (x.cols() != g.dims()) throw DimensionError("gmm: data dimension differs from the model");
  Vector out(x.rows());
  Vector joint;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    detail::component_log_joint(g, x.row(i), joint);
    out[i] = detail::log_sum_exp(joint);
  }
  return out;
}

inline EmResult fit_diagonal_gmm(const Matrix& x, std::size_t k, RngSeed seed, const EmOptions& opts = {}) {
  if (k == 0) throw ParameterError("gmm: need at least one component");
  if (x.rows() < k) throw InputError("gmm: fewer rows than components");
  if (!(opts.variance_floor > 0.0)) throw ParameterError("gmm: variance floor must be positive");
  require_finite(x, "gmm");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const double nd = static_cast<double>(n);

  EmResult res;
  DiagonalGmm& g = res.model;
  {
    const KMeansResult km = kmeans(x, k, seed, opts.kmeans);
    g.weights.assign(k, 0.0);
    g.means.assign(k, Vector(d, 0.0));
    g.variances.assign(k, Vector(d, 0.0));
    for (std::size_t c = 0; c < k; ++c) g.means[c].assign(km.centroids.row(c).begin(), km.centroids.row(c).end());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = km.assignment[i];
      g.weights[c] += 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x(i, j) - g.means[c][j];
        g.variances[c][j] += diff * diff;
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (double& v : g.variances[c]) v = std::max(g.weights[c] > 0.0 ? v / g.weights[c] : 1.0, opts.variance_floor);
      g.weights[c] = std::max(g.weights[c], 1.0) / nd;
    }
    const double total = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
    for (double& w : g.weights) w /= total;
  }

  Matrix resp(n, k);
  Vector row_ll(n);
  Vector joint;
  for (std::size_t it = 0;; ++it) {
    // E-step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      detail::component_log_joint(g, x.row(i), joint);
      const double lse = detail::log_sum_exp(joint);
      row_ll[i] = lse;
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp(i, c) = std::exp(joint[c] - lse);
    }
    ll /= nd;
    if (!std::isfinite(ll)) throw NumericError("gmm: log-likelihood is not finite");
    res.log_likelihood.push_back(ll);
    if (it > 0 && ll - res.log_likelihood[it - 1] < opts.tolerance) {
      res.converged = true;
      break;
    }
    if (it + 1 >= opts.max_iterations) break;

    // M-step
    for (std::size_t c = 0; c < k; ++c) {
      double mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) mass += resp(i, c);
      if (mass < 1e-10) {
        // empty: restart at the worst-explained row with the global spread
        const std::size_t far = static_cast<std::size_t>(std::min_element(row_ll.begin(), row_ll.end()) - row_ll.begin());
        g.means[c].assign(x.row(far).begin(), x.row(far).end());
        const Vector mean = column_means(x);
        for (std::size_t j = 0; j < d; ++j) {
          double v = 0.0;
          for (std::size_t i = 0; i < n; ++i) v += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
          g.variances[c][j] = std::max(v / nd, opts.variance_floor);
        }
        g.weights[c] = 1.0 / nd;
        row_ll[far] = std::numeric_limits<double>::infinity();
        res.reinitialized.push_back(it);
        continue;
      }
      g.weights[c] = mass / nd;
      for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += resp(i, c) * x(i, j);
        g.means[c][j] = m / mass;
      }
      for (std::size_t j = 0; j < d; ++j) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = x(i, j) - g.means[c][j];
          v += resp(i, c) * diff * diff;
        }
        g.variances[c][j] = std::max(v / mass, opts.variance_floor);
      }
    }
    const double total = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
    for (double& w : g.weights) w /= total;
  }
  return res;
}

/// Negative log-likelihood of `test` rows under a diagonal GMM fitted on `train`.
inline Vector gmm_em_baseline(const Matrix& train, const Matrix& test, std::size_t k, RngSeed seed,
                              const EmOptions& opts = {}) {
  const EmResult fit = fit_diagonal_gmm(train, k, seed, opts);
  Vector s = gmm_log_density(fit.model, test);
  for (double& v : s) v = -v;
  return s;
}

// ---- autoencoder reconstruction error ----

/// The compression network trained on reconstruction alone (lambda1 = lambda2 = 0).
inline TrainedModel train_autoencoder(const FeatureMatrix& train_features, const NetworkArchitecture& arch,
                                      TrainConfig cfg) {
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 0.0;
  return train(train_features, arch, cfg);
}

/// Per-row squared reconstruction error |x - x'|^2.
inline Vector reconstruction_errors(const TrainedModel& model, const Matrix& x) {
  if (x.cols() != model.architecture.input_dim) throw DimensionError("reconstruction error: dimension mismatch");
  const ParameterLayout layout(model.architecture);
  const Compression c = compress(layout, model.params, x);
  Vector out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = squared_distance(x.row(i), c.reconstruction().row(i));
  return out;
}

inline Vector da_baseline(const FeatureMatrix& train_features, const Matrix& test, const NetworkArchitecture& arch,
                          const TrainConfig& cfg) {
  return reconstruction_errors(train_autoencoder(train_features, arch, cfg), test);
}

/// Bottleneck codes z_c of the compression network.
inline Matrix encode_rows(const TrainedModel& model, const Matrix& x) {
  const ParameterLayout layout(model.architecture);
  return compress(layout, model.params, x).code();
}

// ---- two-step: reduce, then diagonal GMM ----

struct PcaProjection {
  Vector mean;
  Matrix components;  // D x c, columns by descending variance

  Matrix project(const Matrix& x) const {
    if (x.cols() != mean.size()) throw DimensionError("pca: dimension mismatch");
    Matrix out(x.rows(), components.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t c = 0; c < components.cols(); ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) acc += (x(i, j) - mean[j]) * components(j, c);
        out(i, c) = acc;
      }
    return out;
  }
};

inline PcaProjection fit_pca(const Matrix& train_rows, std::size_t c) {
  if (c < 1 || c > train_rows.cols()) throw ParameterError("pca: need 1 <= c <= D");
  if (train_rows.rows() < 2) throw InputError("pca: need at least 2 rows");
  const auto eig = eigendecompose_symmetric(covariance(train_rows));
  PcaProjection p{column_means(train_rows), Matrix(train_rows.cols(), c)};
  for (std::size_t j = 0; j < train_rows.cols(); ++j)
    for (std::size_t q = 0; q < c; ++q) p.components(j, q) = eig.vectors(j, q);
  return p;
}

enum class Reducer { pca, autoencoder };

inline const char* to_string(Reducer r) { return r == Reducer::pca ? "pca" : "autoencoder"; }

struct TwoStepConfig {
  Reducer reducer = Reducer::pca;
  std::size_t c = 1;
  std::size_t k = 1;
  NetworkArchitecture arch{};  // autoencoder reducer; bottleneck is overridden by c
  TrainConfig train{};
  EmOptions em{};
  RngSeed seed{42};
};

/// Fits the reducer on `train` only, then scores `test` by GMM negative
/// log-likelihood in the reduced space.
inline Vector two_step_baseline(const FeatureMatrix& train_features, const Matrix& test, const TwoStepConfig& cfg) {
  const std::size_t d = train_features.dims();
  if (cfg.c < 1 || cfg.c >= d) throw ParameterError("two-step: need 1 <= c < D");
  if (test.cols() != d) throw DimensionError("two-step: test dimension differs from train");
  Matrix reduced_train, reduced_test;
  if (cfg.reducer == Reducer::pca) {
    const PcaProjection p = fit_pca(train_features.frames, cfg.c);
    reduced_train = p.project(train_features.frames);
    reduced_test = p.project(test);
  } else {
    NetworkArchitecture arch = cfg.arch;
    arch.input_dim = d;
    arch.bottleneck = cfg.c;
    const TrainedModel ae = train_autoencoder(train_features, arch, cfg.train);
    reduced_train = encode_rows(ae, train_features.frames);
    reduced_test = encode_rows(ae, test);
  }
  return gmm_em_baseline(reduced_train, reduced_test, cfg.k, cfg.seed, cfg.em);
}

}  // namespace dagmm_ho
