#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dagmm_ho/dagmm/network.hpp"
#include "dagmm_ho/dagmm/objective.hpp"
#include "dagmm_ho/features/spectrogram.hpp"
#include "dagmm_ho/hpo/gap.hpp"
#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/synth/fixture.hpp"

namespace dagmm_ho {

/// Bad config file, key, or value. Maps to the usage exit code.
struct ConfigError : Error {
  using Error::Error;
};

/// Every knob of the command-line pipeline.
struct PipelineConfig {
  RngSeed seed{42};

  // paths
  std::string data_dir = "data";
  std::string manifest;  // empty: <data_dir>/manifest.txt
  std::string features;  // optional DGHF cache used by tune/train instead of audio
  std::string model = "model.dghm";
  std::string report_dir = "reports";

  FeatureConfig feature{};
  double segment_seconds = 1.0;

  NetworkArchitecture arch{};
  TrainConfig train{};
  double threshold_percentile = 99.0;

  // 0 means: take it from the tuning report
  std::size_t k = 0;
  std::size_t c = 0;

  GapConfig gap{};
  std::size_t gap_sample_rows = 1000;  // rows subsampled for the gap statistic; 0 = all
  bool variance_smooth = false;

  FixtureConfig synth{};

  std::filesystem::path manifest_path() const {
    return manifest.empty() ? std::filesystem::path(data_dir) / kManifestName : std::filesystem::path(manifest);
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: bad value '" + v + "' for " + key);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean '" + v + "' for " + key);
}

inline std::vector<std::size_t> parse_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<std::size_t>(key, item));
  if (out.empty()) throw ConfigError("config: " + key + " needs at least one width");
  return out;
}

inline std::string format_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

inline std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  // field accessors generated per type
  const auto str = [](std::string name, std::string help, std::string PipelineConfig::*f) {
    return ConfigKey{name, help, [f](PipelineConfig& c, const std::string& v) { c.*f = v; },
                     [f](const PipelineConfig& c) { return c.*f; }};
  };
  const auto size = [](std::string name, std::string help, auto getter) {
    return ConfigKey{name, help,
                     [name, getter](PipelineConfig& c, const std::string& v) {
                       getter(c) = parse_number<std::remove_reference_t<decltype(getter(c))>>(name, v);
                     },
                     [getter](const PipelineConfig& c) { return std::to_string(getter(const_cast<PipelineConfig&>(c))); }};
  };
  const auto real = [](std::string name, std::string help, auto getter) {
    return ConfigKey{name, help, [name, getter](PipelineConfig& c, const std::string& v) { getter(c) = parse_number<double>(name, v); },
                     [getter](const PipelineConfig& c) { return format_double(getter(const_cast<PipelineConfig&>(c))); }};
  };
  const auto widths = [](std::string name, std::string help, auto getter) {
    return ConfigKey{name, help, [name, getter](PipelineConfig& c, const std::string& v) { getter(c) = parse_widths(name, v); },
                     [getter](const PipelineConfig& c) { return format_widths(getter(const_cast<PipelineConfig&>(c))); }};
  };
  const auto flag = [](std::string name, std::string help, auto getter) {
    return ConfigKey{name, help, [name, getter](PipelineConfig& c, const std::string& v) { getter(c) = parse_bool(name, v); },
                     [getter](const PipelineConfig& c) { return std::string(getter(const_cast<PipelineConfig&>(c)) ? "true" : "false"); }};
  };

  static const std::vector<ConfigKey> keys{
      {"seed", "master seed (DAGMM_HO_SEED and --seed override it)",
       [](PipelineConfig& c, const std::string& v) { c.seed = RngSeed{parse_number<std::uint64_t>("seed", v)}; },
       [](const PipelineConfig& c) { return std::to_string(c.seed.value); }},
      str("data_dir", "directory holding WAV files and the manifest", &PipelineConfig::data_dir),
      str("manifest", "labeled segment list (empty: <data_dir>/manifest.txt)", &PipelineConfig::manifest),
      str("features", "DGHF feature cache for tune/train instead of audio (empty: off)", &PipelineConfig::features),
      str("model", "model file written by train, read by score/eval", &PipelineConfig::model),
      str("report_dir", "directory for tuning and comparison reports", &PipelineConfig::report_dir),
      size("frame_size", "STFT frame length in samples", [](PipelineConfig& c) -> auto& { return c.feature.frame_size; }),
      size("hop_size", "STFT hop in samples", [](PipelineConfig& c) -> auto& { return c.feature.hop_size; }),
      size("n_mels", "mel bands", [](PipelineConfig& c) -> auto& { return c.feature.n_mels; }),
      size("input_dim", "lowest bands kept as model input", [](PipelineConfig& c) -> auto& { return c.feature.input_dim; }),
      real("segment_seconds", "segment length used by score", [](PipelineConfig& c) -> auto& { return c.segment_seconds; }),
      widths("encoder_hidden", "encoder hidden widths", [](PipelineConfig& c) -> auto& { return c.arch.encoder_hidden; }),
      widths("decoder_hidden", "decoder hidden widths", [](PipelineConfig& c) -> auto& { return c.arch.decoder_hidden; }),
      widths("estimation_hidden", "estimation network hidden widths",
             [](PipelineConfig& c) -> auto& { return c.arch.estimation_hidden; }),
      real("keep_probability", "dropout keep probability in the estimation network",
           [](PipelineConfig& c) -> auto& { return c.arch.keep_probability; }),
      real("lambda1", "energy weight", [](PipelineConfig& c) -> auto& { return c.train.lambda1; }),
      real("lambda2", "covariance penalty weight", [](PipelineConfig& c) -> auto& { return c.train.lambda2; }),
      real("learning_rate", "Adam step size", [](PipelineConfig& c) -> auto& { return c.train.learning_rate; }),
      size("batch_size", "minibatch rows", [](PipelineConfig& c) -> auto& { return c.train.batch_size; }),
      size("epochs", "training epochs (0 writes an untrained model)", [](PipelineConfig& c) -> auto& { return c.train.epochs; }),
      real("jitter", "initial covariance jitter", [](PipelineConfig& c) -> auto& { return c.train.jitter; }),
      real("threshold_percentile", "percentile of training energies used as the threshold",
           [](PipelineConfig& c) -> auto& { return c.threshold_percentile; }),
      size("k", "GMM components (0: read the tuning report)", [](PipelineConfig& c) -> auto& { return c.k; }),
      size("c", "bottleneck dimension (0: read the tuning report)", [](PipelineConfig& c) -> auto& { return c.c; }),
      size("gap_k_min", "smallest k evaluated by the gap statistic", [](PipelineConfig& c) -> auto& { return c.gap.k_min; }),
      size("gap_k_max", "largest k evaluated by the gap statistic", [](PipelineConfig& c) -> auto& { return c.gap.k_max; }),
      size("gap_references", "uniform reference draws per k", [](PipelineConfig& c) -> auto& { return c.gap.reference_draws; }),
      real("gap_rise_tolerance", "minimum gap rise to the knee, in mean standard errors",
           [](PipelineConfig& c) -> auto& { return c.gap.rise_tolerance; }),
      flag("gap_smooth", "3-point smoothing of the gap curve before knee detection",
           [](PipelineConfig& c) -> auto& { return c.gap.bending.smooth; }),
      size("gap_sample_rows", "rows subsampled for the gap statistic (0: all)",
           [](PipelineConfig& c) -> auto& { return c.gap_sample_rows; }),
      flag("variance_smooth", "3-point smoothing of the variance curve", [](PipelineConfig& c) -> auto& { return c.variance_smooth; }),
      size("synth_fans", "fans in the synthetic fixture", [](PipelineConfig& c) -> auto& { return c.synth.fans; }),
      real("synth_duration", "seconds of audio per fan", [](PipelineConfig& c) -> auto& { return c.synth.duration; }),
      size("synth_sample_rate", "fixture sample rate in Hz",
           [](PipelineConfig& c) -> auto& { return c.synth.sample_rate; }),
      size("synth_anomalies", "anomalous segments per fan",
           [](PipelineConfig& c) -> auto& { return c.synth.anomalies_per_fan; }),
      real("synth_segment_seconds", "labeled segment length in the fixture",
           [](PipelineConfig& c) -> auto& { return c.synth.segment_seconds; }),
      real("synth_min_severity", "lowest anomaly severity", [](PipelineConfig& c) -> auto& { return c.synth.min_severity; }),
      real("synth_max_severity", "highest anomaly severity", [](PipelineConfig& c) -> auto& { return c.synth.max_severity; }),
  };
  return keys;
}

inline const ConfigKey& find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw ConfigError("config: unknown key '" + name + "'");
}

inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, value);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Applies `key = value` lines; '#' starts a comment.
inline void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& origin = "config") {
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

inline void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path.string());
}

inline constexpr const char* kSeedEnvVar = "DAGMM_HO_SEED";

inline void apply_seed_env(PipelineConfig& cfg) {
  if (const char* v = std::getenv(kSeedEnvVar); v && *v) {
    try {
      set_config_value(cfg, "seed", v);
    } catch (const ConfigError&) {
      throw ConfigError(std::string(kSeedEnvVar) + ": bad seed '" + v + "'");
    }
  }
}

/// Every key with its default, for --help.
inline std::string config_help() {
  const PipelineConfig defaults;
  std::ostringstream out;
  out << "Config keys (key = value, one per line; defaults shown):\n";
  for (const auto& k : config_keys()) {
    std::string lhs = "  " + k.name + " = " + k.get(defaults);
    if (lhs.size() < 36) lhs.resize(36, ' ');
    out << lhs << "  " << k.help << '\n';
  }
  return out.str();
}

inline std::string format_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.name << " = " << k.get(cfg) << '\n';
  return out.str();
}

}  // namespace dagmm_ho
