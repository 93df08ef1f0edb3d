#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dagmm_ho/dagmm/model.hpp"
#include "dagmm_ho/numcore/binary_io.hpp"
#include "dagmm_ho/numcore/error.hpp"

namespace dagmm_ho {

// Model file, little-endian:
//   "DGHM" u32 version
//   architecture: u32 D, u32 c, u32 K, three (u32 count, u32 widths...) lists
//                 for encoder/decoder/estimation hidden layers, u32 decoder
//                 output activation (0 none, 1 tanh), f64 keep probability
//   features:     u32 frame_size, u32 hop_size, u32 n_mels, u32 input_dim, f64 log_floor
//   parameters:   u64 count, f64 values (encoder, decoder, estimation layers;
//                 each layer weights out x in row-major, then biases)
//   gmm:          u32 K, u32 d, K f64 phi, K*d f64 mu, K*d*d f64 sigma
//   stats:        u32 D, D f64 means, D f64 stddevs
//   f64 eta
//   train config: f64 lambda1, f64 lambda2, f64 learning_rate, u64 batch_size,
//                 u64 epochs, u64 seed, f64 jitter
//   trace:        u64 epochs, f64 losses, f64 initial J, f64 final J
inline constexpr std::uint32_t kModelFileVersion = 1;

inline std::vector<char> encode_model(const TrainedModel& m) {
  ByteWriter out;
  out.bytes("DGHM");
  out.u32(kModelFileVersion);

  const auto& a = m.architecture;
  out.u32(static_cast<std::uint32_t>(a.input_dim));
  out.u32(static_cast<std::uint32_t>(a.bottleneck));
  out.u32(static_cast<std::uint32_t>(a.components));
  for (const auto* widths : {&a.encoder_hidden, &a.decoder_hidden, &a.estimation_hidden}) {
    out.u32(static_cast<std::uint32_t>(widths->size()));
    for (auto w : *widths) out.u32(static_cast<std::uint32_t>(w));
  }
  out.u32(a.decoder_output == Activation::tanh ? 1u : 0u);
  out.f64(a.keep_probability);

  out.u32(static_cast<std::uint32_t>(m.features.frame_size));
  out.u32(static_cast<std::uint32_t>(m.features.hop_size));
  out.u32(static_cast<std::uint32_t>(m.features.n_mels));
  out.u32(static_cast<std::uint32_t>(m.features.input_dim));
  out.f64(m.features.log_floor);

  out.u64(m.params.values.size());
  out.f64s(m.params.values);

  out.u32(static_cast<std::uint32_t>(m.gmm.components()));
  out.u32(static_cast<std::uint32_t>(m.gmm.dims()));
  out.f64s(m.gmm.phi);
  for (const auto& mu : m.gmm.mu) out.f64s(mu);
  for (const auto& s : m.gmm.sigma) out.f64s(s.data());

  out.u32(static_cast<std::uint32_t>(m.stats.dims()));
  out.f64s(m.stats.mean);
  out.f64s(m.stats.stddev);

  out.f64(m.eta);

  out.f64(m.config.lambda1);
  out.f64(m.config.lambda2);
  out.f64(m.config.learning_rate);
  out.u64(m.config.batch_size);
  out.u64(m.config.epochs);
  out.u64(m.config.seed.value);
  out.f64(m.config.jitter);

  out.u64(m.trace.epoch_loss.size());
  out.f64s(m.trace.epoch_loss);
  out.f64(m.trace.initial_objective);
  out.f64(m.trace.final_objective);
  return out.buffer();
}

inline TrainedModel decode_model(std::vector<char> bytes) {
  ByteReader in(std::move(bytes));
  if (in.bytes(4) != "DGHM") throw FormatError("model file: bad magic");
  const std::uint32_t version = in.u32();
  if (version != kModelFileVersion)
    throw VersionError("model file: version " + std::to_string(version) + " is not supported (this build reads version " +
                       std::to_string(kModelFileVersion) + ")");
  TrainedModel m;
  auto& a = m.architecture;
  a.input_dim = in.u32();
  a.bottleneck = in.u32();
  a.components = in.u32();
  for (auto* widths : {&a.encoder_hidden, &a.decoder_hidden, &a.estimation_hidden}) {
    widths->assign(in.u32(), 0);
    for (auto& w : *widths) w = in.u32();
  }
  a.decoder_output = in.u32() == 1 ? Activation::tanh : Activation::none;
  a.keep_probability = in.f64();
  a.validate();

  m.features.frame_size = in.u32();
  m.features.hop_size = in.u32();
  m.features.n_mels = in.u32();
  m.features.input_dim = in.u32();
  m.features.log_floor = in.f64();

  const std::uint64_t count = in.u64();
  if (count != ParameterLayout(a).size) throw FormatError("model file: parameter count does not match architecture");
  m.params.values = in.f64s(count);

  const std::uint32_t k = in.u32();
  const std::uint32_t d = in.u32();
  if (k != a.components || d != a.latent_dim()) throw FormatError("model file: mixture shape does not match architecture");
  m.gmm.phi = in.f64s(k);
  for (std::uint32_t i = 0; i < k; ++i) m.gmm.mu.push_back(in.f64s(d));
  for (std::uint32_t i = 0; i < k; ++i) {
    Matrix s(d, d);
    s.data() = in.f64s(static_cast<std::size_t>(d) * d);
    m.gmm.sigma.push_back(std::move(s));
  }

  const std::uint32_t dims = in.u32();
  m.stats.mean = in.f64s(dims);
  m.stats.stddev = in.f64s(dims);

  m.eta = in.f64();

  m.config.lambda1 = in.f64();
  m.config.lambda2 = in.f64();
  m.config.learning_rate = in.f64();
  m.config.batch_size = in.u64();
  m.config.epochs = in.u64();
  m.config.seed.value = in.u64();
  m.config.jitter = in.f64();

  m.trace.epoch_loss = in.f64s(in.u64());
  m.trace.initial_objective = in.f64();
  m.trace.final_objective = in.f64();
  if (!in.at_end()) throw FormatError("model file: trailing bytes");
  m.refresh_factors();
  return m;
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_file_atomic(path, encode_model(model));
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file_bytes(path));
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace dagmm_ho
