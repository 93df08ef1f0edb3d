#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <tuple>

#include "dagmm_ho/hpo/gap.hpp"
#include "dagmm_ho/hpo/variance.hpp"
#include "oracles.hpp"

using namespace dagmm_ho;
using Catch::Approx;

namespace {

Curve make_curve(const std::function<double(double)>& f, int lo = 1, int hi = 10) {
  Curve c;
  for (int x = lo; x <= hi; ++x) {
    c.x.push_back(x);
    c.y.push_back(f(x));
  }
  return c;
}

Matrix uniform_data(std::size_t rows, std::size_t cols, RngSeed seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform();
  return m;
}

}  // namespace

TEST_CASE("dispersion: small cases", "[hpo][dispersion]") {
  Matrix same{{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
  std::vector<std::size_t> one(3, 0);
  REQUIRE(dispersion(same, one, 1) == 0.0);

  Matrix pq{{0.0, 0.0}, {3.0, 4.0}};
  std::vector<std::size_t> both{0, 0};
  REQUIRE(dispersion(pq, both, 1) == Approx(25.0 / 2.0));

  // empty cluster 1 contributes nothing
  std::vector<std::size_t> labels{0, 2};
  REQUIRE(dispersion(pq, labels, 3) == 0.0);
}

TEST_CASE("dispersion: centroid identity matches pairwise double sum", "[hpo][dispersion]") {
  Rng rng(RngSeed{7});
  for (auto [rows, cols, k] : {std::tuple{20, 2, 3}, {50, 4, 5}, {200, 8, 6}, {200, 8, 1}}) {
    Matrix data = oracle::random_matrix(rows, cols, rng);
    std::vector<std::size_t> labels(rows);
    for (auto& l : labels) l = rng.uniform_index(k);
    REQUIRE(std::abs(dispersion(data, labels, k) - oracle::pairwise_dispersion(data, labels, k)) < 1e-10);
  }
}

TEST_CASE("dispersion: errors", "[hpo][dispersion]") {
  Matrix data{{0.0}, {1.0}};
  std::vector<std::size_t> bad{0, 2};
  REQUIRE_THROWS_AS(dispersion(data, bad, 2), ParameterError);
  std::vector<std::size_t> short_labels{0};
  REQUIRE_THROWS_AS(dispersion(data, short_labels, 1), DimensionError);
}

TEST_CASE("uniform_reference stays inside the bounding box", "[hpo][gap]") {
  Matrix data{{-1.0, 10.0}, {2.0, 11.0}, {0.5, 10.5}};
  Matrix ref = uniform_reference(data, RngSeed{3});
  REQUIRE(ref.rows() == 3);
  for (std::size_t r = 0; r < ref.rows(); ++r) {
    REQUIRE(ref(r, 0) >= -1.0);
    REQUIRE(ref(r, 0) <= 2.0);
    REQUIRE(ref(r, 1) >= 10.0);
    REQUIRE(ref(r, 1) <= 11.0);
  }
  REQUIRE(uniform_reference(data, RngSeed{3}) == ref);
}

TEST_CASE("gap_statistic: determinism and errors", "[hpo][gap]") {
  auto blobs = oracle::make_blobs(3, 30, 2, 10.0, 1.0, RngSeed{1});
  GapConfig cfg;
  cfg.seed = RngSeed{9};
  REQUIRE(gap_statistic(blobs.data, 3, cfg) == gap_statistic(blobs.data, 3, cfg));

  Matrix same(20, 2, 1.5);
  REQUIRE_THROWS_AS(gap_statistic(same, 2, cfg), DegenerateInputError);
  REQUIRE_THROWS_AS(gap_statistic(blobs.data, 11, cfg), ParameterError);
  GapConfig bad = cfg;
  bad.k_min = 5;
  bad.k_max = 5;
  REQUIRE_THROWS_AS(gap_statistic(blobs.data, 5, bad), ParameterError);
  bad = cfg;
  bad.reference_draws = 0;
  REQUIRE_THROWS_AS(gap_statistic(blobs.data, 2, bad), ParameterError);
}

TEST_CASE("gap_statistic: four blobs rise to k=4 then flatten", "[hpo][gap]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto blobs = oracle::make_blobs(4, 50, 2, 10.0, 1.0, RngSeed{100 + seed});
    GapConfig cfg;
    cfg.seed = RngSeed{seed};
    const double g3 = gap_statistic(blobs.data, 3, cfg);
    const double g4 = gap_statistic(blobs.data, 4, cfg);
    const double g5 = gap_statistic(blobs.data, 5, cfg);
    REQUIRE(g4 - g3 > g5 - g4);
    REQUIRE(g4 - g3 > 1.0);
  }
}

TEST_CASE("bending_point: piecewise-linear knee", "[hpo][bending]") {
  auto r = bending_point(make_curve([](double x) { return std::min(x, 5.0); }));
  REQUIRE(r.found());
  REQUIRE(*r.x_star == 5.0);
  REQUIRE(*r.index == 4);
  REQUIRE(r.maxima.size() == 1);
  REQUIRE(r.maxima[0].threshold == Approx(r.maxima[0].y - 1.0 / 9.0));
  REQUIRE(r.x_difference == r.x_normalized);
}

TEST_CASE("bending_point: linear curve has no knee", "[hpo][bending]") {
  auto r = bending_point(make_curve([](double x) { return 3.0 * x - 2.0; }));
  REQUIRE_FALSE(r.found());
  REQUIRE(r.maxima.empty());
  for (double v : r.y_difference) REQUIRE(std::abs(v) < 1e-12);
}

TEST_CASE("bending_point: concave curves select the normalized-difference argmax", "[hpo][bending]") {
  const std::vector<std::function<double(double)>> curves{
      [](double x) { return std::log1p(x); },
      [](double x) { return std::sqrt(x); },
      [](double x) { return 1.0 - std::exp(-x / 2.0); },
      [](double x) { return 1.0 - std::exp(-x / 4.0); },
      [](double x) { return x / (x + 3.0); },
      [](double x) { return std::atan(x / 2.0); },
  };
  for (const auto& f : curves) {
    Curve c = make_curve(f);
    auto r = bending_point(c);
    REQUIRE(r.found());
    REQUIRE(*r.index == oracle::normalized_difference_argmax(c.x, c.y));
    REQUIRE(*r.x_star == c.x[*r.index]);
  }
}

TEST_CASE("bending_point: invariant to affine rescaling", "[hpo][bending]") {
  Curve c = make_curve([](double x) { return std::log1p(x); });
  const auto base = *bending_point(c).index;
  Curve scaled = c;
  for (double& x : scaled.x) x = 0.25 * x + 7.0;
  for (double& y : scaled.y) y = 40.0 * y - 3.0;
  auto r = bending_point(scaled);
  REQUIRE(*r.index == base);
  REQUIRE(*r.x_star == Approx(0.25 * c.x[base] + 7.0));
}

TEST_CASE("bending_point: first confirmed maximum wins", "[hpo][bending]") {
  // knee at 3, then a second smaller bump at 8
  Curve c;
  c.x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  c.y = {0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.4, 1.4, 1.4};
  auto r = bending_point(c);
  REQUIRE(r.found());
  REQUIRE(*r.x_star == 3.0);
  REQUIRE(r.maxima.size() == 2);
  REQUIRE(r.maxima[0].confirmed);
}

TEST_CASE("bending_point: unconfirmed maximum yields no knee", "[hpo][bending]") {
  // y_d = h/9 with max h < 1: the hump never drops a full grid spacing
  Curve c = make_curve([](double x) { return x + 0.5 * std::sin((x - 1.0) * std::numbers::pi / 9.0) * x / 10.0; });
  auto r = bending_point(c);
  REQUIRE(r.maxima.size() == 1);
  REQUIRE_FALSE(r.found());
}

TEST_CASE("bending_point: smoothing option", "[hpo][bending]") {
  BendingPointOptions smooth{true};
  auto r = bending_point(make_curve([](double x) { return std::min(x, 5.0); }), smooth);
  REQUIRE(*r.x_star == 5.0);
  // short curves are left unsmoothed
  Curve four;
  four.x = {1, 2, 3, 4};
  four.y = {0, 1, 1, 1};
  REQUIRE(bending_point(four, smooth).y_normalized == bending_point(four).y_normalized);
}

TEST_CASE("bending_point: invalid curves", "[hpo][bending]") {
  Curve two;
  two.x = {1, 2};
  two.y = {1, 2};
  REQUIRE_THROWS_AS(bending_point(two), ParameterError);
  Curve unordered;
  unordered.x = {1, 3, 2};
  unordered.y = {1, 2, 3};
  REQUIRE_THROWS_AS(bending_point(unordered), ParameterError);
  Curve mismatched;
  mismatched.x = {1, 2, 3};
  mismatched.y = {1, 2};
  REQUIRE_THROWS_AS(bending_point(mismatched), DimensionError);
  Curve nan;
  nan.x = {1, 2, 3};
  nan.y = {1, std::nan(""), 3};
  REQUIRE_THROWS_AS(bending_point(nan), NumericError);
}

TEST_CASE("round_half_up", "[hpo]") {
  REQUIRE(round_half_up(2.5) == 3);
  REQUIRE(round_half_up(2.49) == 2);
  REQUIRE(round_half_up(4.0) == 4);
}

TEST_CASE("select_k: four blobs", "[hpo][select_k]") {
  auto blobs = oracle::make_blobs(4, 50, 2, 10.0, 1.0, RngSeed{11});
  GapConfig cfg;
  cfg.seed = RngSeed{4};
  auto s = select_k(blobs.data, cfg);
  REQUIRE(s.k == 4);
  REQUIRE_FALSE(s.fallback);
  REQUIRE(s.points.size() == 10);
  REQUIRE(s.curve.kind == CurveKind::gap);
  REQUIRE(select_k(blobs.data, cfg).k == s.k);
  REQUIRE(select_k(blobs.data, cfg).curve.y == s.curve.y);
}

TEST_CASE("select_k: structureless data falls back to k_min", "[hpo][select_k]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GapConfig cfg;
    cfg.seed = RngSeed{seed};
    auto uniform = select_k(uniform_data(200, 2, RngSeed{500 + seed}), cfg);
    REQUIRE(uniform.k == 1);
    REQUIRE(uniform.fallback);

    auto blob = select_k(oracle::make_blobs(1, 200, 2, 10.0, 0.1, RngSeed{900 + seed}).data, cfg);
    REQUIRE(blob.k == 1);
    REQUIRE(blob.fallback);
  }
  GapConfig cfg;
  cfg.k_min = 2;
  cfg.k_max = 6;
  REQUIRE(select_k(uniform_data(200, 2, RngSeed{1}), cfg).k == 2);
}

TEST_CASE("select_k: errors", "[hpo][select_k]") {
  GapConfig cfg;
  REQUIRE_THROWS_AS(select_k(uniform_data(5, 2, RngSeed{1}), cfg), ParameterError);
  REQUIRE_THROWS_AS(select_k(Matrix(20, 2, 0.0), cfg), DegenerateInputError);
}

TEST_CASE("variance_ratio_curve: shapes", "[hpo][variance]") {
  Rng rng(RngSeed{3});
  Matrix iso = oracle::random_matrix(5000, 8, rng);
  auto v = variance_ratio_curve(iso);
  REQUIRE(v.curve.size() == 8);
  REQUIRE(v.curve.kind == CurveKind::variance);
  for (std::size_t i = 0; i < 8; ++i) REQUIRE(std::abs(v.curve.y[i] - (i + 1) / 8.0) < 0.03);
  REQUIRE(std::abs(v.curve.y.back() - 1.0) < 1e-9);
  for (std::size_t i = 1; i < 8; ++i) REQUIRE(v.curve.y[i] >= v.curve.y[i - 1]);

  Matrix rank1(50, 4);
  for (std::size_t r = 0; r < 50; ++r)
    for (std::size_t c = 0; c < 4; ++c) rank1(r, c) = static_cast<double>(r) * (c + 1.0);
  for (double y : variance_ratio_curve(rank1).curve.y) REQUIRE(y == Approx(1.0).margin(1e-9));

  Matrix embedded = oracle::low_rank_embedding(2000, 10, 3, 0.01, RngSeed{5});
  auto e = variance_ratio_curve(embedded);
  REQUIRE(e.curve.y[2] > 0.99);
  REQUIRE(e.curve.y[1] < 0.9);
  REQUIRE(std::accumulate(e.ratios.begin(), e.ratios.end(), 0.0) == Approx(1.0));
}

TEST_CASE("variance_ratio_curve: errors", "[hpo][variance]") {
  REQUIRE_THROWS_AS(variance_ratio_curve(Matrix(10, 3, 2.0)), DegenerateInputError);
  REQUIRE_THROWS_AS(variance_ratio_curve(Matrix(1, 3, 2.0)), InputError);
  REQUIRE_THROWS_AS(variance_ratio_curve(Matrix(10, 1, 2.0)), InputError);
}

TEST_CASE("select_c: embedded rank-3 signal", "[hpo][select_c]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Matrix embedded = oracle::low_rank_embedding(1000, 10, 3, 0.01, RngSeed{seed});
    auto s = select_c(embedded);
    REQUIRE(s.c == 3);
    REQUIRE_FALSE(s.fallback);
    REQUIRE(select_c(embedded).c == s.c);
  }
}

TEST_CASE("select_c: isotropic data uses the 95% fallback", "[hpo][select_c]") {
  Rng rng(RngSeed{8});
  Matrix iso = oracle::random_matrix(5000, 10, rng);
  auto s = select_c(iso);
  REQUIRE(s.fallback);
  std::size_t expected = 0;
  while (s.variance.curve.y[expected] < 0.95) ++expected;
  REQUIRE(s.c == std::min<std::size_t>(expected + 1, 9));
}

TEST_CASE("select_c: clamped to D-1", "[hpo][select_c]") {
  Rng rng(RngSeed{2});
  Matrix two = oracle::random_matrix(100, 2, rng);
  REQUIRE(select_c(two).c == 1);
  FeatureMatrix fm;
  fm.frames = oracle::low_rank_embedding(500, 6, 2, 0.01, RngSeed{1});
  REQUIRE(select_c(fm).c == 2);
}
