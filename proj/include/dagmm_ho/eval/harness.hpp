#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dagmm_ho/dagmm/model.hpp"
#include "dagmm_ho/dagmm/trainer.hpp"
#include "dagmm_ho/eval/baselines.hpp"
#include "dagmm_ho/eval/metrics.hpp"
#include "dagmm_ho/features/log_mel.hpp"
#include "dagmm_ho/features/segments.hpp"
#include "dagmm_ho/features/wav.hpp"

namespace dagmm_ho {

/// Raw (unstandardized) log-mel frames of one labeled segment.
struct SegmentData {
  Segment segment;
  Matrix frames;
};

using ClipLoader = std::function<AudioClip(const std::string& file)>;

inline std::vector<SegmentData> extract_segments(const std::vector<Segment>& segments, const ClipLoader& load,
                                                 const FeatureConfig& cfg) {
  std::map<std::string, std::pair<FeatureMatrix, std::uint32_t>> cache;
  std::vector<SegmentData> out;
  for (const auto& s : segments) {
    auto it = cache.find(s.file);
    if (it == cache.end()) {
      const AudioClip clip = load(s.file);
      it = cache.emplace(s.file, std::make_pair(log_mel(clip, cfg), clip.sample_rate)).first;
    }
    const auto& [features, rate] = it->second;
    const FrameRange r = frames_in_window(s.start, s.end, rate, features.rows(), cfg);
    if (r.size() == 0)
      throw InputError(s.file + " [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                       "): segment holds no complete frame");
    std::vector<std::size_t> idx(r.size());
    std::iota(idx.begin(), idx.end(), r.begin);
    out.push_back({s, features.frames.select_rows(idx)});
  }
  return out;
}

inline std::vector<SegmentData> extract_segments(const std::vector<Segment>& segments,
                                                 const std::filesystem::path& audio_dir, const FeatureConfig& cfg) {
  return extract_segments(segments, [&](const std::string& f) { return load_wav(audio_dir / f); }, cfg);
}

/// Test set: every anomalous segment plus as many normal ones (seeded pick);
/// the remaining normal segments train.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline Split split_segments(const std::vector<Segment>& segments, RngSeed seed) {
  std::vector<std::size_t> anomalies, normals;
  for (std::size_t i = 0; i < segments.size(); ++i) (segments[i].anomalous ? anomalies : normals).push_back(i);
  if (anomalies.empty() || normals.empty()) throw MetricError("split: manifest must label both normal and anomalous segments");
  if (normals.size() <= anomalies.size())
    throw InputError("split: need more normal segments than anomalous ones to leave training data");
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(normals));
  Split s;
  s.test = anomalies;
  s.test.insert(s.test.end(), normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(anomalies.size()));
  s.train.assign(normals.begin() + static_cast<std::ptrdiff_t>(anomalies.size()), normals.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

inline Matrix stack_frames(const std::vector<SegmentData>& data, const std::vector<std::size_t>& which) {
  Matrix out(0, data.empty() ? 0 : data.front().frames.cols());
  for (std::size_t i : which) out.append_rows(data[i].frames);
  return out;
}

/// Mean of frame scores per segment; `frame_scores` follows stack_frames order.
inline Vector segment_means(const std::vector<SegmentData>& data, const std::vector<std::size_t>& which,
                            const Vector& frame_scores) {
  Vector out;
  std::size_t pos = 0;
  for (std::size_t i : which) {
    const std::size_t n = data[i].frames.rows();
    double acc = 0.0;
    for (std::size_t q = 0; q < n; ++q) acc += frame_scores.at(pos + q);
    out.push_back(acc / static_cast<double>(n));
    pos += n;
  }
  return out;
}

struct ComparisonConfig {
  std::size_t k = 4;
  std::size_t c = 1;
  NetworkArchitecture arch{};  // hidden widths; input_dim, bottleneck and components are filled in
  TrainConfig train{};
  EmOptions em{};
  RngSeed seed{42};
};

struct MethodResult {
  std::string method;
  MetricsReport metrics;
};

struct ComparisonTable {
  std::vector<MethodResult> rows;

  const MethodResult& row(const std::string& method) const {
    for (const auto& r : rows)
      if (r.method == method) return r;
    throw ParameterError("comparison table: no row '" + method + "'");
  }
};

inline const std::vector<std::string>& comparison_methods() {
  static const std::vector<std::string> m{"DAE", "GMM", "PCA+GMM", "DAE+GMM", "Proposed"};
  return m;
}

struct ComparisonRun {
  ComparisonTable table;
  Split split;
  std::map<std::string, LabeledScores> scores;  // per-segment test scores
  TrainedModel proposed;
};

/// Trains every method on the training segments and scores the test segments.
/// A non-null `pretrained` is scored as the proposed method instead of training
/// one; it must have been fitted on the same training segments.
inline ComparisonRun run_comparison(const std::vector<SegmentData>& data, const Split& split, const ComparisonConfig& cfg,
                                    const TrainedModel* pretrained = nullptr) {
  if (data.empty()) throw InputError("comparison: no segments");
  ComparisonRun run;
  run.split = split;
  const FeatureMatrix raw_train{stack_frames(data, split.train), FeatureConfig{}, {}};
  const Standardization stats = fit_standardization(raw_train.frames);
  FeatureMatrix train_features = standardize(raw_train, stats);
  train_features.config.input_dim = train_features.dims();
  const Matrix test = standardize(FeatureMatrix{stack_frames(data, split.test), FeatureConfig{}, {}}, stats).frames;
  const std::size_t d = train_features.dims();

  LabeledScores base;
  for (std::size_t i : split.test) base.labels.push_back(data[i].segment.anomalous);
  const auto record = [&](const std::string& name, const Vector& frame_scores) {
    LabeledScores ls = base;
    ls.scores = segment_means(data, split.test, frame_scores);
    run.scores[name] = ls;
    run.table.rows.push_back({name, evaluate_scores(ls)});
  };

  NetworkArchitecture ae_arch = cfg.arch;
  ae_arch.input_dim = d;
  ae_arch.bottleneck = cfg.c;
  ae_arch.components = 1;
  TrainConfig ae_train = cfg.train;
  ae_train.seed = derive_seed(cfg.seed, 1);
  const TrainedModel ae = train_autoencoder(train_features, ae_arch, ae_train);
  record("DAE", reconstruction_errors(ae, test));

  record("GMM", gmm_em_baseline(train_features.frames, test, cfg.k, derive_seed(cfg.seed, 2), cfg.em));

  const PcaProjection pca = fit_pca(train_features.frames, cfg.c);
  record("PCA+GMM", gmm_em_baseline(pca.project(train_features.frames), pca.project(test), cfg.k,
                                    derive_seed(cfg.seed, 3), cfg.em));

  record("DAE+GMM", gmm_em_baseline(encode_rows(ae, train_features.frames), encode_rows(ae, test), cfg.k,
                                    derive_seed(cfg.seed, 4), cfg.em));

  if (pretrained) {
    if (pretrained->architecture.input_dim != d) throw DimensionError("comparison: model input dimension differs from features");
    run.proposed = *pretrained;
    // the model standardizes with its own statistics
    const Matrix own = standardize(FeatureMatrix{stack_frames(data, split.test), FeatureConfig{}, {}}, pretrained->stats).frames;
    record("Proposed", score(run.proposed, own));
    return run;
  }
  NetworkArchitecture arch = cfg.arch;
  arch.input_dim = d;
  arch.bottleneck = cfg.c;
  arch.components = cfg.k;
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 5);
  run.proposed = train(train_features, arch, tc);
  record("Proposed", score(run.proposed, test));
  return run;
}

// ---- comparison table output ----

inline std::string format_comparison_text(const ComparisonTable& t) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %9s %9s %9s %9s\n", "Method", "Precision", "Recall", "F1", "AUC");
  out << buf;
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%-10s %9.4f %9.4f %9.4f %9.4f\n", r.method.c_str(), r.metrics.precision,
                  r.metrics.recall, r.metrics.f1, r.metrics.auc);
    out << buf;
  }
  return out.str();
}

inline constexpr const char* kComparisonCsvHeader = "method,precision,recall,f1,auc,threshold,tp,fp,tn,fn";

inline std::string format_comparison_csv(const ComparisonTable& t) {
  std::ostringstream out;
  out << kComparisonCsvHeader << '\n';
  char buf[512];
  for (const auto& r : t.rows) {
    const auto& m = r.metrics;
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu,%zu,%zu\n", r.method.c_str(), m.precision,
                  m.recall, m.f1, m.auc, m.threshold, m.tp, m.fp, m.tn, m.fn);
    out << buf;
  }
  return out.str();
}

inline ComparisonTable parse_comparison_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kComparisonCsvHeader) throw FormatError("comparison csv: bad header");
  ComparisonTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw FormatError("comparison csv: expected 10 fields in '" + line + "'");
    MethodResult r;
    r.method = f[0];
    try {
      r.metrics.precision = std::stod(f[1]);
      r.metrics.recall = std::stod(f[2]);
      r.metrics.f1 = std::stod(f[3]);
      r.metrics.auc = std::stod(f[4]);
      r.metrics.threshold = std::stod(f[5]);
      r.metrics.tp = std::stoul(f[6]);
      r.metrics.fp = std::stoul(f[7]);
      r.metrics.tn = std::stoul(f[8]);
      r.metrics.fn = std::stoul(f[9]);
    } catch (const std::logic_error&) {
      throw FormatError("comparison csv: malformed number in '" + line + "'");
    }
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace dagmm_ho
