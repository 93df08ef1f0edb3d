#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dagmm_ho/dagmm/gmm.hpp"
#include "dagmm_ho/dagmm/network.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/matrix.hpp"
#include "dagmm_ho/numcore/rng.hpp"

namespace dagmm_ho {

struct TrainConfig {
  double lambda1 = 0.1;
  double lambda2 = 0.005;
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  RngSeed seed{42};
  double jitter = 1e-6;

  void validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ParameterError("train config: lambda1 and lambda2 must be nonnegative");
    if (!(learning_rate > 0.0)) throw ParameterError("train config: learning_rate must be positive");
    if (!(jitter > 0.0)) throw ParameterError("train config: jitter must be positive");
    if (batch_size == 0) throw ParameterError("train config: batch_size must be at least 1");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// z_r = ||x - x'|| / (||x|| + 1e-12).
inline double recon_feature(std::span<const double> x, std::span<const double> x_prime) {
  if (x.size() != x_prime.size()) throw DimensionError("recon_feature: length mismatch");
  return std::sqrt(squared_distance(x, x_prime)) / (norm2(x) + 1e-12);
}

/// Dropout masks for the estimation hidden layers. Empty = dropout off.
using DropoutMasks = std::vector<Matrix>;

/// Inverted-dropout masks (entries 0 or 1/keep) for one batch.
inline DropoutMasks draw_dropout_masks(const NetworkArchitecture& arch, std::size_t rows, Rng& rng) {
  DropoutMasks masks;
  if (arch.keep_probability >= 1.0) return masks;
  for (std::size_t width : arch.estimation_hidden) {
    Matrix m(rows, width);
    for (double& v : m.data()) v = rng.uniform() < arch.keep_probability ? 1.0 / arch.keep_probability : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

/// Everything the forward pass of J produces for one batch.
struct BatchForward {
  std::vector<Matrix> encoder_acts;
  std::vector<Matrix> decoder_acts;
  std::vector<Matrix> estimation_acts;  // post-activation, pre-dropout
  std::vector<Matrix> estimation_inputs;  // input to each estimation layer (after dropout)
  Vector diff_norm;   // ||x_i - x'_i||
  Vector input_norm;  // ||x_i||
  Matrix z;           // N x (c+1)
  Matrix gamma;       // N x K
  GmmEstimate gmm;
  std::vector<GaussianFactor> factors;
  Vector energies;
  Matrix responsibilities;  // N x K posterior weights inside E(z_i)
};

struct ObjectiveTerms {
  double total = 0.0;
  double reconstruction = 0.0;  // (1/N) sum ||x - x'||^2
  double energy = 0.0;          // (1/N) sum E(z_i), unweighted
  double penalty = 0.0;         // sum_k sum_j 1 / S_k,jj, unweighted
};

/// Compression network: z_c, x', and the latent z = [z_c, z_r] per row.
struct Compression {
  std::vector<Matrix> encoder_acts;
  std::vector<Matrix> decoder_acts;
  Vector diff_norm;
  Vector input_norm;
  Matrix z;

  const Matrix& code() const { return encoder_acts.back(); }
  const Matrix& reconstruction() const { return decoder_acts.back(); }
};

inline Compression compress(const ParameterLayout& layout, const ModelParameters& params, const Matrix& x) {
  Compression out;
  out.encoder_acts = stack_forward(layout.encoder, params.values, x);
  out.decoder_acts = stack_forward(layout.decoder, params.values, out.encoder_acts.back());
  const Matrix& zc = out.encoder_acts.back();
  const Matrix& xr = out.decoder_acts.back();
  const std::size_t n = x.rows();
  const std::size_t c = zc.cols();
  out.diff_norm.resize(n);
  out.input_norm.resize(n);
  out.z = Matrix(n, c + 1);
  for (std::size_t i = 0; i < n; ++i) {
    out.diff_norm[i] = std::sqrt(squared_distance(x.row(i), xr.row(i)));
    out.input_norm[i] = norm2(x.row(i));
    std::copy(zc.row(i).begin(), zc.row(i).end(), out.z.row(i).begin());
    out.z(i, c) = out.diff_norm[i] / (out.input_norm[i] + 1e-12);
  }
  return out;
}

/// Estimation network: gamma = softmax(MLN(z)). `masks` empty = no dropout.
inline Matrix estimate_membership(const ParameterLayout& layout, const ModelParameters& params, const Matrix& z,
                                  const DropoutMasks& masks, std::vector<Matrix>* acts = nullptr,
                                  std::vector<Matrix>* inputs = nullptr) {
  Matrix h = z;
  for (std::size_t l = 0; l < layout.estimation.size(); ++l) {
    if (inputs != nullptr) inputs->push_back(h);
    Matrix y = dense_forward(layout.estimation[l], params.values, h);
    if (acts != nullptr) acts->push_back(y);
    if (l + 1 < layout.estimation.size() && !masks.empty()) {
      const Matrix& m = masks[l];
      for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] *= m.data()[i];
    }
    h = std::move(y);
  }
  softmax_rows(h);
  return h;
}

inline BatchForward forward_batch(const NetworkArchitecture& arch, const ParameterLayout& layout,
                                  const ModelParameters& params, const Matrix& x, double jitter,
                                  const DropoutMasks& masks) {
  if (x.cols() != arch.input_dim)
    throw DimensionError("objective: batch has " + std::to_string(x.cols()) + " columns, architecture expects " +
                         std::to_string(arch.input_dim));
  if (x.rows() == 0) throw InputError("objective: empty batch");
  BatchForward f;
  Compression comp = compress(layout, params, x);
  f.encoder_acts = std::move(comp.encoder_acts);
  f.decoder_acts = std::move(comp.decoder_acts);
  f.diff_norm = std::move(comp.diff_norm);
  f.input_norm = std::move(comp.input_norm);
  f.z = std::move(comp.z);
  f.gamma = estimate_membership(layout, params, f.z, masks, &f.estimation_acts, &f.estimation_inputs);
  f.gmm = estimate_gmm(f.z, f.gamma);
  f.factors = factorize_all(f.gmm.gmm, jitter);
  const std::size_t n = x.rows();
  f.energies.resize(n);
  f.responsibilities = Matrix(n, arch.components);
  Vector resp;
  for (std::size_t i = 0; i < n; ++i) {
    f.energies[i] = negative_log_sum_exp(component_log_densities(f.z.row(i), f.gmm.gmm, f.factors), &resp);
    std::copy(resp.begin(), resp.end(), f.responsibilities.row(i).begin());
  }
  return f;
}

inline ObjectiveTerms objective_terms(const BatchForward& f, const TrainConfig& cfg) {
  ObjectiveTerms t;
  const double n = static_cast<double>(f.z.rows());
  for (std::size_t i = 0; i < f.diff_norm.size(); ++i) {
    t.reconstruction += f.diff_norm[i] * f.diff_norm[i];
    t.energy += f.energies[i];
  }
  t.reconstruction /= n;
  t.energy /= n;
  for (const auto& factor : f.factors)
    for (std::size_t j = 0; j < factor.regularized.rows(); ++j) t.penalty += 1.0 / factor.regularized(j, j);
  t.total = t.reconstruction + cfg.lambda1 * t.energy + cfg.lambda2 * t.penalty;
  if (!std::isfinite(t.total)) {
    std::string term = !std::isfinite(t.reconstruction) ? "reconstruction"
                       : !std::isfinite(t.energy)        ? "energy"
                                                         : "covariance penalty";
    throw NumericError("objective is not finite (" + term + " term)");
  }
  return t;
}

/// J = (1/N) sum ||x - x'||^2 + (lambda1/N) sum E(z_i) + lambda2 P(Sigma),
/// with the mixture estimated from this batch's memberships.
inline ObjectiveTerms objective(const NetworkArchitecture& arch, const ModelParameters& params, const Matrix& x,
                                const TrainConfig& cfg, const DropoutMasks& masks = {}) {
  const ParameterLayout layout(arch);
  return objective_terms(forward_batch(arch, layout, params, x, cfg.jitter, masks), cfg);
}

struct ObjectiveGradient {
  ObjectiveTerms terms;
  Vector gradient;  // dJ/dtheta, same layout as ModelParameters::values
};

/// Analytic dJ/dtheta, back-propagated through the energy, the batch mixture
/// estimate, the softmax, dropout and both halves of the autoencoder.
inline ObjectiveGradient objective_gradient(const NetworkArchitecture& arch, const ModelParameters& params, const Matrix& x,
                                            const TrainConfig& cfg, const DropoutMasks& masks = {}) {
  const ParameterLayout layout(arch);
  const BatchForward f = forward_batch(arch, layout, params, x, cfg.jitter, masks);
  ObjectiveGradient out{objective_terms(f, cfg), Vector(layout.size, 0.0)};
  Vector& grad = out.gradient;

  const std::size_t n = x.rows();
  const std::size_t d = f.z.cols();
  const std::size_t c = d - 1;
  const std::size_t k_count = arch.components;
  const double nd = static_cast<double>(n);
  const double energy_weight = cfg.lambda1 / nd;
  const GmmParameters& gmm = f.gmm.gmm;

  std::vector<Matrix> precision(k_count);
  for (std::size_t k = 0; k < k_count; ++k) precision[k] = cholesky_inverse(f.factors[k].chol);

  // Gradients of J with respect to phi, mu and the regularized covariances.
  Vector g_phi(k_count, 0.0);
  std::vector<Vector> g_mu(k_count, Vector(d, 0.0));
  std::vector<Matrix> g_sigma(k_count, Matrix(d, d));
  Matrix g_z(n, d);

  Vector v(d);
  Vector w(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < k_count; ++k) {
      const double r = f.responsibilities(i, k);
      if (r == 0.0) continue;
      const double gr = energy_weight * r;
      g_phi[k] -= gr / gmm.phi[k];
      for (std::size_t a = 0; a < d; ++a) v[a] = f.z(i, a) - gmm.mu[k][a];
      for (std::size_t a = 0; a < d; ++a) w[a] = dot(precision[k].row(a), v);
      for (std::size_t a = 0; a < d; ++a) {
        g_z(i, a) += gr * w[a];
        g_mu[k][a] -= gr * w[a];
      }
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) g_sigma[k](a, b) += 0.5 * gr * (precision[k](a, b) - w[a] * w[b]);
    }
  }
  for (std::size_t k = 0; k < k_count; ++k)
    for (std::size_t j = 0; j < d; ++j) {
      const double s = f.factors[k].regularized(j, j);
      g_sigma[k](j, j) -= cfg.lambda2 / (s * s);
    }

  // Chain through phi_k = m_k/N, mu_k = sum gamma z / m_k and
  // Sigma_k = sum gamma (z-mu)(z-mu)^T / m_k. dSigma/dmu vanishes because the
  // weighted deviations sum to zero.
  Matrix g_gamma(n, k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double mass = f.gmm.mass[k];
    const bool frozen = f.gmm.degenerate[k];
    double trace_gs = 0.0;
    if (!frozen)
      for (std::size_t a = 0; a < d; ++a) trace_gs += dot(g_sigma[k].row(a), gmm.sigma[k].row(a));
    for (std::size_t i = 0; i < n; ++i) {
      double gg = g_phi[k] / nd;
      if (!frozen) {
        for (std::size_t a = 0; a < d; ++a) v[a] = f.z(i, a) - gmm.mu[k][a];
        for (std::size_t a = 0; a < d; ++a) w[a] = dot(g_sigma[k].row(a), v);  // G_Sigma v
        gg += (dot(g_mu[k], v) + dot(v, w) - trace_gs) / mass;
        const double scale = f.gamma(i, k) / mass;
        for (std::size_t a = 0; a < d; ++a) g_z(i, a) += scale * (g_mu[k][a] + 2.0 * w[a]);
      }
      g_gamma(i, k) = gg;
    }
  }

  // Softmax, then the estimation network (dropout masks scale the gradient).
  Matrix g_h(n, k_count);
  for (std::size_t i = 0; i < n; ++i) {
    const double inner = dot(f.gamma.row(i), g_gamma.row(i));
    for (std::size_t k = 0; k < k_count; ++k) g_h(i, k) = f.gamma(i, k) * (g_gamma(i, k) - inner);
  }
  for (std::size_t l = layout.estimation.size(); l-- > 0;) {
    if (l + 1 < layout.estimation.size() && !masks.empty()) {
      const Matrix& m = masks[l];
      for (std::size_t i = 0; i < g_h.size(); ++i) g_h.data()[i] *= m.data()[i];
    }
    g_h = dense_backward(layout.estimation[l], params.values, f.estimation_inputs[l], f.estimation_acts[l], std::move(g_h),
                         grad);
  }
  for (std::size_t i = 0; i < g_z.size(); ++i) g_z.data()[i] += g_h.data()[i];

  // Reconstruction term and z_r = ||x - x'|| / (||x|| + eps) feed the decoder output.
  const Matrix& xr = f.decoder_acts.back();
  Matrix g_xr(n, arch.input_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double g_zr = g_z(i, c);
    const double dn = f.diff_norm[i];
    const double zr_scale = dn > 0.0 ? g_zr / (dn * (f.input_norm[i] + 1e-12)) : 0.0;
    for (std::size_t j = 0; j < arch.input_dim; ++j) {
      const double diff = xr(i, j) - x(i, j);
      g_xr(i, j) = 2.0 * diff / nd + zr_scale * diff;
    }
  }
  Matrix g_zc = stack_backward(layout.decoder, params.values, f.decoder_acts, std::move(g_xr), grad);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < c; ++a) g_zc(i, a) += g_z(i, a);
  stack_backward(layout.encoder, params.values, f.encoder_acts, std::move(g_zc), grad);

  for (double g : grad)
    if (!std::isfinite(g)) throw NumericError("objective gradient is not finite");
  return out;
}

}  // namespace dagmm_ho
