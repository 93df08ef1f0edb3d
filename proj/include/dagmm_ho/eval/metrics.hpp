#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/matrix.hpp"

namespace dagmm_ho {

/// Scores (higher = more anomalous) with ground truth (true = anomaly).
struct LabeledScores {
  Vector scores;
  std::vector<bool> labels;

  std::size_t positives() const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true)); }
  std::size_t negatives() const { return labels.size() - positives(); }

  void validate() const {
    if (scores.size() != labels.size()) throw DimensionError("labeled scores: one label per score required");
    for (double s : scores)
      if (std::isnan(s)) throw MetricError("labeled scores: NaN score");
  }
};

/// Mann-Whitney AUC from mid-ranks; tied pairs count one half.
inline double auc(const LabeledScores& ls) {
  ls.validate();
  const std::size_t pos = ls.positives();
  const std::size_t neg = ls.negatives();
  if (pos == 0 || neg == 0) throw MetricError("auc: both classes must be present");
  const std::size_t n = ls.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ls.scores[a] < ls.scores[b]; });
  // twice the rank sum keeps mid-ranks integral
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && ls.scores[order[j]] == ls.scores[order[i]]) ++j;
    const double twice_mid = static_cast<double>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t q = i; q < j; ++q)
      if (ls.labels[order[q]]) twice_rank_sum += twice_mid;
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double wins = (twice_rank_sum - p * (p + 1.0)) / 2.0;
  return wins / (p * static_cast<double>(neg));
}

struct MetricsReport {
  double auc = std::numeric_limits<double>::quiet_NaN();
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Confusion counts and P/R/F1 predicting anomaly when score > threshold.
/// Undefined ratios are reported as 0. AUC is left unset.
inline MetricsReport classification_metrics(const LabeledScores& ls, double threshold) {
  ls.validate();
  MetricsReport m;
  m.threshold = threshold;
  for (std::size_t i = 0; i < ls.scores.size(); ++i) {
    const bool predicted = ls.scores[i] > threshold;
    if (ls.labels[i]) predicted ? ++m.tp : ++m.fn;
    else predicted ? ++m.fp : ++m.tn;
  }
  const auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

/// Threshold maximizing F1 over every distinct cut of the scores (the
/// highest such threshold on ties).
inline double max_f1_threshold(const LabeledScores& ls) {
  ls.validate();
  if (ls.scores.empty()) throw MetricError("max_f1_threshold: no scores");
  Vector cuts = ls.scores;
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.insert(cuts.begin(), std::nextafter(cuts.front(), -std::numeric_limits<double>::infinity()));
  double best = cuts.front();
  double best_f1 = -1.0;
  for (double t : cuts) {
    const double f1 = classification_metrics(ls, t).f1;
    if (f1 >= best_f1) {
      best_f1 = f1;
      best = t;
    }
  }
  return best;
}

/// AUC plus classification metrics at the max-F1 threshold.
inline MetricsReport evaluate_scores(const LabeledScores& ls) {
  MetricsReport m = classification_metrics(ls, max_f1_threshold(ls));
  m.auc = auc(ls);
  return m;
}

}  // namespace dagmm_ho
