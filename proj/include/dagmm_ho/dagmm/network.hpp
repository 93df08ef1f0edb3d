#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/matrix.hpp"
#include "dagmm_ho/numcore/rng.hpp"

namespace dagmm_ho {

enum class Activation { none, tanh };

inline const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "none"; }

/// Layer shapes of the compression and estimation networks.
///
/// The default instance is
///   encoder    FC(D,30,tanh) - FC(30,10,tanh) - FC(10,c,none)
///   decoder    FC(c,10,tanh) - FC(10,30,tanh) - FC(30,D,tanh)
///   estimation FC(c+1,10,tanh) - Drop(keep) - FC(10,K,softmax)
/// where every estimation hidden layer is followed by inverted dropout.
struct NetworkArchitecture {
  std::size_t input_dim = 64;
  std::size_t bottleneck = 1;
  std::size_t components = 1;
  std::vector<std::size_t> encoder_hidden{30, 10};
  std::vector<std::size_t> decoder_hidden{10, 30};
  std::vector<std::size_t> estimation_hidden{10};
  Activation decoder_output = Activation::tanh;
  double keep_probability = 0.5;

  static NetworkArchitecture standard(std::size_t input_dim, std::size_t bottleneck, std::size_t components) {
    NetworkArchitecture a;
    a.input_dim = input_dim;
    a.bottleneck = bottleneck;
    a.components = components;
    return a;
  }

  std::size_t latent_dim() const { return bottleneck + 1; }

  void validate() const {
    if (bottleneck < 1 || bottleneck >= input_dim)
      throw ParameterError("architecture: bottleneck c must satisfy 1 <= c < D (c=" + std::to_string(bottleneck) +
                           ", D=" + std::to_string(input_dim) + ")");
    if (components < 1) throw ParameterError("architecture: need at least one GMM component");
    if (!(keep_probability > 0.0 && keep_probability <= 1.0))
      throw ParameterError("architecture: keep probability must be in (0, 1]");
    for (auto w : encoder_hidden) if (w == 0) throw ParameterError("architecture: zero-width encoder layer");
    for (auto w : decoder_hidden) if (w == 0) throw ParameterError("architecture: zero-width decoder layer");
    for (auto w : estimation_hidden) if (w == 0) throw ParameterError("architecture: zero-width estimation layer");
  }

  friend bool operator==(const NetworkArchitecture&, const NetworkArchitecture&) = default;
};

/// One fully connected layer inside the flat parameter vector. Weights are
/// out x in, row-major, followed by `out` biases.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::none;
  std::size_t offset = 0;

  std::size_t weight_count() const { return in * out; }
  std::size_t bias_offset() const { return offset + weight_count(); }
  std::size_t parameter_count() const { return weight_count() + out; }
};

/// Where each sub-network's layers live in the flat parameter vector:
/// encoder, then decoder, then estimation network.
struct ParameterLayout {
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;
  std::vector<DenseLayer> estimation;
  std::size_t size = 0;

  explicit ParameterLayout(const NetworkArchitecture& arch) {
    auto build = [this](std::vector<DenseLayer>& dst, std::size_t in, const std::vector<std::size_t>& hidden,
                        Activation hidden_act, std::size_t out, Activation out_act) {
      std::size_t prev = in;
      for (std::size_t w : hidden) {
        dst.push_back({prev, w, hidden_act, size});
        size += dst.back().parameter_count();
        prev = w;
      }
      dst.push_back({prev, out, out_act, size});
      size += dst.back().parameter_count();
    };
    build(encoder, arch.input_dim, arch.encoder_hidden, Activation::tanh, arch.bottleneck, Activation::none);
    build(decoder, arch.bottleneck, arch.decoder_hidden, Activation::tanh, arch.input_dim, arch.decoder_output);
    // Softmax is applied outside the layer stack.
    build(estimation, arch.latent_dim(), arch.estimation_hidden, Activation::tanh, arch.components, Activation::none);
  }
};

/// theta_enc, theta_dec and theta_est packed in one vector (see ParameterLayout).
struct ModelParameters {
  Vector values;
  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

/// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
inline ModelParameters initialize_parameters(const NetworkArchitecture& arch, RngSeed seed) {
  arch.validate();
  const ParameterLayout layout(arch);
  ModelParameters p{Vector(layout.size, 0.0)};
  Rng rng(seed);
  auto init = [&](const std::vector<DenseLayer>& layers) {
    for (const auto& layer : layers) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
      for (std::size_t i = 0; i < layer.weight_count(); ++i) p.values[layer.offset + i] = rng.uniform(-limit, limit);
    }
  };
  init(layout.encoder);
  init(layout.decoder);
  init(layout.estimation);
  return p;
}

/// y = act(x W^T + b) for a batch of rows.
inline Matrix dense_forward(const DenseLayer& layer, const Vector& params, const Matrix& input) {
  if (input.cols() != layer.in)
    throw DimensionError("dense layer expects " + std::to_string(layer.in) + " inputs, got " + std::to_string(input.cols()));
  Matrix out(input.rows(), layer.out);
  const double* w = params.data() + layer.offset;
  const double* b = params.data() + layer.bias_offset();
  for (std::size_t r = 0; r < input.rows(); ++r) {
    auto x = input.row(r);
    auto y = out.row(r);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* wo = w + o * layer.in;
      double s = b[o];
      for (std::size_t i = 0; i < layer.in; ++i) s += wo[i] * x[i];
      y[o] = layer.activation == Activation::tanh ? std::tanh(s) : s;
    }
  }
  return out;
}

/// Back-propagates `grad_out` (dL/dy) through one layer; accumulates the
/// weight/bias gradient into `grad_params` and returns dL/dx.
inline Matrix dense_backward(const DenseLayer& layer, const Vector& params, const Matrix& input, const Matrix& output,
                             Matrix grad_out, Vector& grad_params) {
  if (layer.activation == Activation::tanh) {
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
      const double y = output.data()[i];
      grad_out.data()[i] *= 1.0 - y * y;
    }
  }
  double* gw = grad_params.data() + layer.offset;
  double* gb = grad_params.data() + layer.bias_offset();
  const double* w = params.data() + layer.offset;
  Matrix grad_in(input.rows(), layer.in);
  for (std::size_t r = 0; r < input.rows(); ++r) {
    auto x = input.row(r);
    auto g = grad_out.row(r);
    auto gi = grad_in.row(r);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      gb[o] += go;
      double* gwo = gw + o * layer.in;
      const double* wo = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) {
        gwo[i] += go * x[i];
        gi[i] += go * wo[i];
      }
    }
  }
  return grad_in;
}

/// Forward pass keeping every intermediate activation; acts[0] is the input.
inline std::vector<Matrix> stack_forward(const std::vector<DenseLayer>& layers, const Vector& params, const Matrix& input) {
  std::vector<Matrix> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(input);
  for (const auto& layer : layers) acts.push_back(dense_forward(layer, params, acts.back()));
  return acts;
}

inline Matrix stack_backward(const std::vector<DenseLayer>& layers, const Vector& params, const std::vector<Matrix>& acts,
                             Matrix grad_out, Vector& grad_params) {
  for (std::size_t l = layers.size(); l-- > 0;)
    grad_out = dense_backward(layers[l], params, acts[l], acts[l + 1], std::move(grad_out), grad_params);
  return grad_out;
}

inline void softmax_rows(Matrix& logits) {
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

}  // namespace dagmm_ho
