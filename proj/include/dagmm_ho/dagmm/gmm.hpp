#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/linalg.hpp"
#include "dagmm_ho/numcore/matrix.hpp"

namespace dagmm_ho {

/// Mixture weights, means and (pre-jitter) covariances over the latent z.
struct GmmParameters {
  Vector phi;
  std::vector<Vector> mu;
  std::vector<Matrix> sigma;

  std::size_t components() const { return phi.size(); }
  std::size_t dims() const { return mu.empty() ? 0 : mu.front().size(); }

  friend bool operator==(const GmmParameters&, const GmmParameters&) = default;
};

inline constexpr double kEmptyComponentMass = 1e-12;
inline constexpr double kMaxJitter = 1e-2;

struct GmmEstimate {
  GmmParameters gmm;
  Vector mass;                    // sum_i gamma_ik
  std::vector<bool> degenerate;   // mass below kEmptyComponentMass
};

/// Membership-weighted mixture estimate from a batch of latent rows and
/// their soft memberships. A component with (numerically) zero mass keeps
/// `previous`'s mean and covariance when given, otherwise mean 0 and
/// identity covariance.
inline GmmEstimate estimate_gmm(const Matrix& z, const Matrix& gamma, const GmmParameters* previous = nullptr) {
  if (z.rows() == 0) throw InputError("estimate_gmm: empty batch");
  if (gamma.rows() != z.rows()) throw DimensionError("estimate_gmm: gamma and z row counts differ");
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();
  const std::size_t k_count = gamma.cols();
  GmmEstimate est;
  est.gmm.phi.assign(k_count, 0.0);
  est.gmm.mu.assign(k_count, Vector(d, 0.0));
  est.gmm.sigma.assign(k_count, Matrix(d, d));
  est.mass.assign(k_count, 0.0);
  est.degenerate.assign(k_count, false);

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < k_count; ++k) est.mass[k] += gamma(i, k);

  for (std::size_t k = 0; k < k_count; ++k) {
    est.gmm.phi[k] = est.mass[k] / static_cast<double>(n);
    if (est.mass[k] < kEmptyComponentMass) {
      est.degenerate[k] = true;
      if (previous != nullptr && k < previous->components() && previous->dims() == d) {
        est.gmm.mu[k] = previous->mu[k];
        est.gmm.sigma[k] = previous->sigma[k];
      } else {
        est.gmm.sigma[k] = Matrix::identity(d);
      }
      continue;
    }
    Vector& mu = est.gmm.mu[k];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mu[j] += gamma(i, k) * z(i, j);
    for (double& v : mu) v /= est.mass[k];

    Matrix& sigma = est.gmm.sigma[k];
    Vector diff(d);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = gamma(i, k);
      for (std::size_t j = 0; j < d; ++j) diff[j] = z(i, j) - mu[j];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) sigma(a, b) += g * diff[a] * diff[b];
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        sigma(a, b) /= est.mass[k];
        sigma(b, a) = sigma(a, b);
      }
  }
  return est;
}

/// Cholesky factor of sigma + jitter*I, with the jitter that succeeded.
struct GaussianFactor {
  Matrix chol;
  double log_det = 0.0;  // log |sigma + jitter I|
  double jitter = 0.0;
  Matrix regularized;    // sigma + jitter I
};

/// Tries jitter, 10*jitter, ... up to 1e-2; NumericError when all fail.
inline GaussianFactor factorize_covariance(const Matrix& sigma, double jitter) {
  if (!(jitter > 0.0)) throw ParameterError("covariance jitter must be positive");
  for (double j = jitter; j <= kMaxJitter * (1.0 + 1e-9); j *= 10.0) {
    Matrix reg = sigma;
    for (std::size_t i = 0; i < reg.rows(); ++i) reg(i, i) += j;
    try {
      Matrix l = cholesky(reg);
      const double log_det = cholesky_log_det(l);
      return {std::move(l), log_det, j, std::move(reg)};
    } catch (const NumericError&) {
    }
  }
  throw NumericError("covariance is not positive definite even with jitter 1e-2");
}

inline std::vector<GaussianFactor> factorize_all(const GmmParameters& gmm, double jitter) {
  std::vector<GaussianFactor> out;
  out.reserve(gmm.components());
  for (const auto& s : gmm.sigma) out.push_back(factorize_covariance(s, jitter));
  return out;
}

/// log(phi_k) + log N(z; mu_k, sigma_k + jitter I) for each k. Components with
/// phi_k == 0 yield -infinity.
inline Vector component_log_densities(std::span<const double> z, const GmmParameters& gmm,
                                      const std::vector<GaussianFactor>& factors) {
  const std::size_t d = z.size();
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  Vector out(gmm.components());
  Vector diff(d);
  for (std::size_t k = 0; k < gmm.components(); ++k) {
    if (!(gmm.phi[k] > 0.0)) {
      out[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) diff[j] = z[j] - gmm.mu[k][j];
    forward_substitute(factors[k].chol, diff);
    const double quad = dot(diff, diff);
    out[k] = std::log(gmm.phi[k]) - 0.5 * quad - 0.5 * (static_cast<double>(d) * log_two_pi + factors[k].log_det);
  }
  return out;
}

/// -log sum_k exp(terms_k), written into responsibilities as softmax(terms).
inline double negative_log_sum_exp(const Vector& terms, Vector* responsibilities = nullptr) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : terms) mx = std::max(mx, t);
  if (!std::isfinite(mx)) throw NumericError("sample energy: every mixture component has zero weight");
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - mx);
  if (responsibilities != nullptr) {
    responsibilities->resize(terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k) (*responsibilities)[k] = std::exp(terms[k] - mx) / sum;
  }
  return -(mx + std::log(sum));
}

inline double sample_energy(std::span<const double> z, const GmmParameters& gmm, const std::vector<GaussianFactor>& factors) {
  if (z.size() != gmm.dims()) throw DimensionError("sample_energy: latent dimension differs from mixture");
  return negative_log_sum_exp(component_log_densities(z, gmm, factors));
}

/// E(z) = -log sum_k phi_k exp(-1/2 (z-mu_k)^T S_k^{-1} (z-mu_k)) / sqrt|2 pi S_k|
/// with S_k = sigma_k + jitter I, evaluated through Cholesky and log-sum-exp.
inline double sample_energy(std::span<const double> z, const GmmParameters& gmm, double jitter) {
  return sample_energy(z, gmm, factorize_all(gmm, jitter));
}

}  // namespace dagmm_ho
