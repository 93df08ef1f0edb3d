#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/matrix.hpp"
#include "dagmm_ho/numcore/rng.hpp"

namespace dagmm_ho {

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // max centroid shift that counts as converged
};

struct KMeansResult {
  Matrix centroids;
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // one entry per Lloyd assignment step
};

namespace detail {

// Nearest centroid, ties to the lowest index.
inline std::size_t nearest_centroid(std::span<const double> point, const Matrix& centroids, double& best_dist) {
  std::size_t best = 0;
  best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(point, centroids.row(c));
    if (d < best_dist) {
      best_dist = d;
      best = c;
    }
  }
  return best;
}

inline Matrix kmeans_plus_plus(const Matrix& data, std::size_t k, Rng& rng) {
  const std::size_t n = data.rows();
  Matrix centroids(k, data.cols());
  std::vector<bool> chosen(n, false);
  std::size_t first = rng.uniform_index(n);
  chosen[first] = true;
  std::copy(data.row(first).begin(), data.row(first).end(), centroids.row(0).begin());

  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(data.row(i), centroids.row(0));

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : dist) total += d;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (dist[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;)
          if (dist[i] > 0.0) {
            pick = i;
            break;
          }
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a centroid.
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    }
    chosen[pick] = true;
    std::copy(data.row(pick).begin(), data.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = std::min(dist[i], squared_distance(data.row(i), centroids.row(c)));
  }
  return centroids;
}

inline KMeansResult lloyd(const Matrix& data, Matrix centroids, const KMeansOptions& opts) {
  const std::size_t n = data.rows();
  const std::size_t k = centroids.rows();
  const std::size_t dims = data.cols();
  KMeansResult result;
  result.assignment.assign(n, 0);

  auto assign = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      result.assignment[i] = nearest_centroid(data.row(i), centroids, d);
      inertia += d;
    }
    return inertia;
  };

  result.inertia = assign();
  result.inertia_trace.push_back(result.inertia);
  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    Matrix sums(k, dims);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.assignment[i];
      ++counts[c];
      auto src = data.row(i);
      auto dst = sums.row(c);
      for (std::size_t j = 0; j < dims; ++j) dst[j] += src[j];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dims; ++j) {
        const double updated = sums(c, j) / static_cast<double>(counts[c]);
        shift = std::max(shift, std::abs(updated - centroids(c, j)));
        centroids(c, j) = updated;
      }
    }
    result.inertia = assign();
    result.inertia_trace.push_back(result.inertia);
    if (shift < opts.tolerance) break;
  }
  result.centroids = std::move(centroids);
  return result;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding; keeps the lowest-inertia result
/// over `opts.restarts` initializations (earliest restart wins ties).
inline KMeansResult kmeans(const Matrix& data, std::size_t k, RngSeed seed, const KMeansOptions& opts = {}) {
  if (k == 0) throw ParameterError("kmeans: k must be at least 1");
  if (k > data.rows()) throw ParameterError("kmeans: k exceeds the number of rows");
  require_finite(data, "kmeans");
  Rng rng(seed);
  KMeansResult best;
  bool have_best = false;
  const std::size_t restarts = std::max<std::size_t>(opts.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    KMeansResult candidate = detail::lloyd(data, detail::kmeans_plus_plus(data, k, rng), opts);
    if (!have_best || candidate.inertia < best.inertia) {
      best = std::move(candidate);
      have_best = true;
    }
  }
  return best;
}

}  // namespace dagmm_ho
