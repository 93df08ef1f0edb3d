#pragma once

// Small DAGMM fixtures shared by the unit and acceptance suites: a direct
// re-implementation of the joint objective and the finite-difference
// gradient check built on it.

#include <cmath>
#include <vector>

#include "dagmm_ho/dagmm/network.hpp"
#include "dagmm_ho/dagmm/objective.hpp"
#include "dagmm_ho/numcore/finite_difference.hpp"
#include "oracles.hpp"

namespace tiny {

using namespace dagmm_ho;

/// Standard init plus random biases, so no gradient entry is trivially zero.
inline ModelParameters perturbed_parameters(const NetworkArchitecture& arch, RngSeed seed) {
  ModelParameters p = initialize_parameters(arch, seed);
  Rng rng(derive_seed(seed, 99));
  const ParameterLayout layout(arch);
  for (const auto* group : {&layout.encoder, &layout.decoder, &layout.estimation})
    for (const auto& layer : *group)
      for (std::size_t o = 0; o < layer.out; ++o) p.values[layer.bias_offset() + o] = 0.3 * rng.normal();
  return p;
}

inline Vector naive_layer(const DenseLayer& layer, const Vector& params, const Vector& in) {
  Vector out(layer.out);
  for (std::size_t o = 0; o < layer.out; ++o) {
    double s = params[layer.bias_offset() + o];
    for (std::size_t i = 0; i < layer.in; ++i) s += params[layer.offset + o * layer.in + i] * in[i];
    out[o] = layer.activation == Activation::tanh ? std::tanh(s) : s;
  }
  return out;
}

/// J from its definition, sample by sample, with an explicit-inverse energy.
inline ObjectiveTerms naive_objective(const NetworkArchitecture& arch, const ModelParameters& params, const Matrix& x,
                                      const TrainConfig& cfg) {
  const ParameterLayout layout(arch);
  const std::size_t n = x.rows();
  const std::size_t d = arch.latent_dim();
  const std::size_t kk = arch.components;
  std::vector<Vector> zs;
  std::vector<Vector> gammas;
  ObjectiveTerms t;
  for (std::size_t i = 0; i < n; ++i) {
    Vector h(x.row(i).begin(), x.row(i).end());
    for (const auto& l : layout.encoder) h = naive_layer(l, params.values, h);
    Vector zc = h;
    for (const auto& l : layout.decoder) h = naive_layer(l, params.values, h);
    double err = 0.0;
    double xn = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      err += (x(i, j) - h[j]) * (x(i, j) - h[j]);
      xn += x(i, j) * x(i, j);
    }
    t.reconstruction += err / static_cast<double>(n);
    Vector z = zc;
    z.push_back(std::sqrt(err) / (std::sqrt(xn) + 1e-12));
    Vector e = z;
    for (const auto& l : layout.estimation) e = naive_layer(l, params.values, e);
    double mx = e[0];
    for (double v : e) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : e) sum += (v = std::exp(v - mx));
    for (double& v : e) v /= sum;
    zs.push_back(z);
    gammas.push_back(e);
  }
  Vector phi(kk, 0.0);
  std::vector<Vector> mu(kk, Vector(d, 0.0));
  std::vector<Matrix> sigma(kk, Matrix(d, d));
  for (std::size_t k = 0; k < kk; ++k) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass += gammas[i][k];
    phi[k] = mass / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < d; ++a) mu[k][a] += gammas[i][k] * zs[i][a] / mass;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          sigma[k](a, b) += gammas[i][k] * (zs[i][a] - mu[k][a]) * (zs[i][b] - mu[k][b]) / mass;
    for (std::size_t a = 0; a < d; ++a) sigma[k](a, a) += cfg.jitter;
    for (std::size_t a = 0; a < d; ++a) t.penalty += 1.0 / sigma[k](a, a);
  }
  for (std::size_t i = 0; i < n; ++i) t.energy += oracle::naive_energy(zs[i], phi, mu, sigma) / static_cast<double>(n);
  t.total = t.reconstruction + cfg.lambda1 * t.energy + cfg.lambda2 * t.penalty;
  return t;
}

struct GradientReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t parameters = 0;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6) per parameter;
/// the floor keeps near-zero entries from turning round-off into "relative"
/// error.
inline GradientReport compare_gradients(const Vector& analytic, const Vector& numeric) {
  GradientReport r;
  r.parameters = analytic.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
    const double rel = std::abs(analytic[i] - numeric[i]) / denom;
    if (rel > r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst_index = i;
    }
  }
  return r;
}

/// Tiny instance N=8; without dropout the numeric side differentiates the
/// naive objective, with dropout it differentiates the library forward pass
/// under the same fixed masks.
inline GradientReport gradient_check(const NetworkArchitecture& arch, RngSeed seed, bool with_dropout = false) {
  const ModelParameters params = perturbed_parameters(arch, seed);
  Rng rng(derive_seed(seed, 5));
  const Matrix x = oracle::random_matrix(8, arch.input_dim, rng);
  TrainConfig cfg;
  DropoutMasks masks;
  if (with_dropout) masks = draw_dropout_masks(arch, x.rows(), rng);
  const Vector analytic = objective_gradient(arch, params, x, cfg, masks).gradient;
  auto f = [&](const Vector& v) {
    ModelParameters p{v};
    return with_dropout ? objective(arch, p, x, cfg, masks).total : naive_objective(arch, p, x, cfg).total;
  };
  return compare_gradients(analytic, finite_difference_gradient(f, params.values, 1e-5));
}

}  // namespace tiny
