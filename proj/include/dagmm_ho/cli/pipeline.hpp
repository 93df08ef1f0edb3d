#pragma once

#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dagmm_ho/cli/config.hpp"
#include "dagmm_ho/dagmm/model_io.hpp"
#include "dagmm_ho/dagmm/trainer.hpp"
#include "dagmm_ho/eval/harness.hpp"
#include "dagmm_ho/hpo/gap.hpp"
#include "dagmm_ho/hpo/variance.hpp"
#include "dagmm_ho/synth/fixture.hpp"

namespace dagmm_ho {

inline constexpr const char* kTuningTextName = "tuning.txt";
inline constexpr const char* kTuningTableName = "tuning.tsv";
inline constexpr const char* kComparisonTextName = "comparison.txt";
inline constexpr const char* kComparisonCsvName = "comparison.csv";

namespace detail {

inline void say(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << std::flush;
}

}  // namespace detail

/// Train/test split of the manifest; train, tune and eval all derive it from the seed.
inline Split pipeline_split(const std::vector<Segment>& segments, RngSeed seed) {
  return split_segments(segments, derive_seed(seed, 7));
}

/// Labeled segments with their raw frames, plus the split.
struct LabeledData {
  std::vector<SegmentData> segments;
  Split split;
};

inline LabeledData load_labeled_data(const PipelineConfig& cfg) {
  const auto manifest = cfg.manifest_path();
  const auto segments = load_manifest(manifest);
  if (segments.empty()) throw InputError(manifest.string() + ": no segments");
  const auto audio_dir = manifest.has_parent_path() ? manifest.parent_path() : std::filesystem::path(".");
  LabeledData d;
  d.split = pipeline_split(segments, cfg.seed);
  d.segments = extract_segments(segments, audio_dir, cfg.feature);
  return d;
}

/// Raw (unstandardized) training frames: the feature cache when configured,
/// otherwise the normal training segments of the manifest.
inline FeatureMatrix load_training_features(const PipelineConfig& cfg) {
  if (!cfg.features.empty()) {
    FeatureMatrix f = load_feature_cache(cfg.features);
    f.stats = Standardization::identity(f.dims());
    return f;
  }
  const LabeledData d = load_labeled_data(cfg);
  FeatureConfig fc = cfg.feature;
  return {stack_frames(d.segments, d.split.train), fc, Standardization::identity(fc.input_dim)};
}

// ---- synth ----

inline std::filesystem::path cmd_synth(const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                                       std::ostream* log = nullptr) {
  FixtureConfig fc = cfg.synth;
  fc.seed = cfg.seed;
  const Fixture fx = build_fixture(fc);
  const auto manifest = write_fixture(fx, out_dir);
  detail::say(log, "wrote " + std::to_string(fx.clips.size()) + " clips and " + std::to_string(fx.segments.size()) +
                       " segments to " + out_dir.string() + "\n");
  return manifest;
}

// ---- tune ----

struct TuningReport {
  std::size_t k = 1;
  std::size_t c = 1;
  bool k_fallback = false;
  bool k_weak_knee = false;
  bool c_fallback = false;
  std::size_t rows = 0;  // training frames
  std::size_t gap_rows = 0;  // frames used by the gap statistic
  std::vector<GapPoint> gap;
  Vector cumulative_variance;  // index i -> ratio for the first i + 1 components
};

inline std::string format_tuning_text(const TuningReport& r) {
  std::ostringstream out;
  char buf[160];
  out << "K = " << r.k << (r.k_fallback ? " (fallback" : "") << (r.k_fallback && r.k_weak_knee ? ", weak knee)" : "")
      << (r.k_fallback && !r.k_weak_knee ? ")" : "") << '\n';
  out << "c = " << r.c << (r.c_fallback ? " (fallback: 95% variance)" : "") << '\n';
  out << "frames: " << r.rows << " (gap statistic on " << r.gap_rows << ")\n\n";
  std::snprintf(buf, sizeof buf, "%4s %10s %10s\n", "k", "gap", "std.err");
  out << buf;
  for (const auto& p : r.gap) {
    std::snprintf(buf, sizeof buf, "%4zu %10.5f %10.5f\n", p.k, p.gap, p.standard_error);
    out << buf;
  }
  out << '\n';
  std::snprintf(buf, sizeof buf, "%4s %10s\n", "i", "cum.var");
  out << buf;
  for (std::size_t i = 0; i < r.cumulative_variance.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%4zu %10.6f\n", i + 1, r.cumulative_variance[i]);
    out << buf;
  }
  return out.str();
}

/// Columnar form: "<field> <values...>" per line.
inline std::string format_tuning_table(const TuningReport& r) {
  std::ostringstream out;
  char buf[200];
  out << "# dagmm_ho tuning report\n";
  out << "k " << r.k << "\nc " << r.c << "\nk_fallback " << r.k_fallback << "\nk_weak_knee " << r.k_weak_knee
      << "\nc_fallback " << r.c_fallback << "\nrows " << r.rows << "\ngap_rows " << r.gap_rows << '\n';
  for (const auto& p : r.gap) {
    std::snprintf(buf, sizeof buf, "gap %zu %.17g %.17g %.17g %.17g %.17g\n", p.k, p.gap, p.log_observed,
                  p.log_reference_mean, p.log_reference_sd, p.standard_error);
    out << buf;
  }
  for (std::size_t i = 0; i < r.cumulative_variance.size(); ++i) {
    std::snprintf(buf, sizeof buf, "variance %zu %.17g\n", i + 1, r.cumulative_variance[i]);
    out << buf;
  }
  return out.str();
}

inline TuningReport parse_tuning_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  TuningReport r;
  bool have_k = false, have_c = false;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream f(line);
    std::string field;
    f >> field;
    bool ok = true;
    if (field == "k") ok = static_cast<bool>(f >> r.k), have_k = true;
    else if (field == "c") ok = static_cast<bool>(f >> r.c), have_c = true;
    else if (field == "k_fallback") ok = static_cast<bool>(f >> r.k_fallback);
    else if (field == "k_weak_knee") ok = static_cast<bool>(f >> r.k_weak_knee);
    else if (field == "c_fallback") ok = static_cast<bool>(f >> r.c_fallback);
    else if (field == "rows") ok = static_cast<bool>(f >> r.rows);
    else if (field == "gap_rows") ok = static_cast<bool>(f >> r.gap_rows);
    else if (field == "gap") {
      GapPoint p;
      ok = static_cast<bool>(f >> p.k >> p.gap >> p.log_observed >> p.log_reference_mean >> p.log_reference_sd >>
                             p.standard_error);
      r.gap.push_back(p);
    } else if (field == "variance") {
      std::size_t i = 0;
      double v = 0.0;
      ok = static_cast<bool>(f >> i >> v) && i == r.cumulative_variance.size() + 1;
      r.cumulative_variance.push_back(v);
    } else {
      throw FormatError("tuning report line " + std::to_string(n) + ": unknown field '" + field + "'");
    }
    if (!ok) throw FormatError("tuning report line " + std::to_string(n) + ": malformed '" + line + "'");
  }
  if (!have_k || !have_c || r.k == 0 || r.c == 0) throw FormatError("tuning report: missing k or c");
  return r;
}

inline TuningReport load_tuning_report(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_tuning_table(std::string(bytes.begin(), bytes.end()));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// select_k on a seeded row subsample of the standardized training frames,
/// select_c on all of them.
inline TuningReport tune(const FeatureMatrix& raw_train, const PipelineConfig& cfg) {
  const FeatureMatrix x = standardize(raw_train);
  TuningReport r;
  r.rows = x.rows();
  Matrix gap_data = x.frames;
  if (cfg.gap_sample_rows > 0 && x.rows() > cfg.gap_sample_rows) {
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(cfg.seed, 8));
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(cfg.gap_sample_rows);
    std::sort(idx.begin(), idx.end());
    gap_data = x.frames.select_rows(idx);
  }
  r.gap_rows = gap_data.rows();
  GapConfig g = cfg.gap;
  g.seed = derive_seed(cfg.seed, 9);
  const KSelection ks = select_k(gap_data, g);
  r.k = ks.k;
  r.k_fallback = ks.fallback;
  r.k_weak_knee = ks.weak_knee;
  r.gap = ks.points;
  const CSelection cs = select_c(x, BendingPointOptions{cfg.variance_smooth});
  r.c = cs.c;
  r.c_fallback = cs.fallback;
  r.cumulative_variance = cs.variance.curve.y;
  return r;
}

inline TuningReport cmd_tune(const PipelineConfig& cfg, const std::filesystem::path& out_dir, std::ostream* log = nullptr) {
  const FeatureMatrix raw = load_training_features(cfg);
  detail::say(log, "tuning on " + std::to_string(raw.rows()) + " frames x " + std::to_string(raw.dims()) + " dims\n");
  const TuningReport r = tune(raw, cfg);
  write_file_atomic(out_dir / kTuningTableName, format_tuning_table(r));
  write_file_atomic(out_dir / kTuningTextName, format_tuning_text(r));
  detail::say(log, format_tuning_text(r));
  return r;
}

// ---- train ----

/// (K, c) from the config, or from the tuning report for any left at 0.
inline std::pair<std::size_t, std::size_t> resolve_k_c(const PipelineConfig& cfg) {
  std::size_t k = cfg.k, c = cfg.c;
  if (k == 0 || c == 0) {
    const auto path = std::filesystem::path(cfg.report_dir) / kTuningTableName;
    if (!std::filesystem::exists(path))
      throw ConfigError("k and c not set and no tuning report at " + path.string() + " (run tune first)");
    const TuningReport r = load_tuning_report(path);
    if (k == 0) k = r.k;
    if (c == 0) c = r.c;
  }
  return {k, c};
}

inline TrainedModel train_pipeline_model(const FeatureMatrix& raw_train, std::size_t k, std::size_t c,
                                         const PipelineConfig& cfg) {
  FeatureMatrix x = standardize(raw_train);
  x.config.input_dim = x.dims();
  NetworkArchitecture arch = cfg.arch;
  arch.input_dim = x.dims();
  arch.bottleneck = c;
  arch.components = k;
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 5);
  TrainedModel m = train(x, arch, tc);
  if (cfg.threshold_percentile != 99.0) m.eta = choose_threshold(score(m, x), cfg.threshold_percentile);
  return m;
}

inline TrainedModel cmd_train(const PipelineConfig& cfg, const std::filesystem::path& model_path, std::ostream* log = nullptr) {
  if (!(cfg.threshold_percentile > 0.0 && cfg.threshold_percentile <= 100.0))
    throw ConfigError("threshold_percentile must be in (0, 100]");
  const auto [k, c] = resolve_k_c(cfg);
  const FeatureMatrix raw = load_training_features(cfg);
  detail::say(log, "training K = " + std::to_string(k) + ", c = " + std::to_string(c) + " on " +
                       std::to_string(raw.rows()) + " frames for " + std::to_string(cfg.train.epochs) + " epochs\n");
  const TrainedModel m = train_pipeline_model(raw, k, c, cfg);
  save_model(model_path, m);
  char buf[200];
  std::snprintf(buf, sizeof buf, "objective: initial %.6g, final %.6g; threshold %.6g\n", m.trace.initial_objective,
                m.trace.final_objective, m.eta);
  detail::say(log, buf);
  if (!m.trace.epoch_loss.empty()) {
    std::snprintf(buf, sizeof buf, "epoch loss: first %.6g, last %.6g\n", m.trace.epoch_loss.front(),
                  m.trace.epoch_loss.back());
    detail::say(log, buf);
  }
  detail::say(log, "wrote " + model_path.string() + "\n");
  return m;
}

// ---- score ----

struct ScoreRow {
  std::string file;
  std::size_t segment = 0;
  double start = 0.0;
  double end = 0.0;
  double mean_energy = 0.0;
  double max_energy = 0.0;
  bool flagged = false;
};

/// Consecutive windows of `segment_seconds`; a clip shorter than one window is one segment.
inline std::vector<ScoreRow> score_clip(const TrainedModel& model, const std::string& name, const AudioClip& clip,
                                        double segment_seconds) {
  if (!(segment_seconds > 0.0)) throw ConfigError("segment_seconds must be positive");
  const FeatureMatrix f = standardize(log_mel(clip, model.features), model.stats);
  const Vector e = score(model, f);
  const double duration = clip.duration_seconds();
  std::vector<std::pair<double, double>> windows;
  for (std::size_t i = 0; (static_cast<double>(i) + 1.0) * segment_seconds <= duration + 1e-9; ++i)
    windows.emplace_back(static_cast<double>(i) * segment_seconds, static_cast<double>(i + 1) * segment_seconds);
  if (windows.empty()) windows.emplace_back(0.0, duration);
  std::vector<ScoreRow> out;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const FrameRange r = frames_in_window(windows[w].first, windows[w].second, clip.sample_rate, f.rows(), model.features);
    if (r.size() == 0) throw InputError(name + ": segment " + std::to_string(w) + " holds no complete frame");
    ScoreRow row{name, w, windows[w].first, windows[w].second, 0.0, -std::numeric_limits<double>::infinity(), false};
    for (std::size_t q = r.begin; q < r.end; ++q) {
      row.mean_energy += e[q];
      row.max_energy = std::max(row.max_energy, e[q]);
    }
    row.mean_energy /= static_cast<double>(r.size());
    row.flagged = row.mean_energy > model.eta;
    out.push_back(row);
  }
  return out;
}

inline constexpr const char* kScoreHeader = "file\tsegment\tstart\tend\tmean_energy\tmax_energy\tflag";

inline std::string format_scores(const std::vector<ScoreRow>& rows) {
  if (rows.empty()) return "";
  std::ostringstream out;
  out << kScoreHeader << '\n';
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "\t%zu\t%.6g\t%.6g\t%.9g\t%.9g\t%d\n", r.segment, r.start, r.end, r.mean_energy,
                  r.max_energy, r.flagged ? 1 : 0);
    out << r.file << buf;
  }
  return out.str();
}

inline std::vector<ScoreRow> cmd_score(const PipelineConfig& cfg, const std::filesystem::path& model_path,
                                       const std::vector<std::string>& files) {
  std::vector<ScoreRow> rows;
  if (files.empty()) return rows;
  const TrainedModel m = load_model(model_path);
  for (const auto& f : files) {
    const auto part = score_clip(m, f, load_wav(f), cfg.segment_seconds);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

// ---- eval ----

inline ComparisonRun cmd_eval(const PipelineConfig& cfg, const std::filesystem::path& model_path,
                              const std::filesystem::path& out_dir, std::ostream* log = nullptr) {
  const TrainedModel m = load_model(model_path);
  const LabeledData d = load_labeled_data(cfg);
  ComparisonConfig cc;
  cc.k = m.architecture.components;
  cc.c = m.architecture.bottleneck;
  cc.arch = cfg.arch;
  cc.train = cfg.train;
  cc.seed = cfg.seed;
  detail::say(log, "evaluating on " + std::to_string(d.split.test.size()) + " test segments (" +
                       std::to_string(d.split.train.size()) + " train)\n");
  const ComparisonRun run = run_comparison(d.segments, d.split, cc, &m);
  write_file_atomic(out_dir / kComparisonCsvName, format_comparison_csv(run.table));
  write_file_atomic(out_dir / kComparisonTextName, format_comparison_text(run.table));
  detail::say(log, format_comparison_text(run.table));
  return run;
}

}  // namespace dagmm_ho
