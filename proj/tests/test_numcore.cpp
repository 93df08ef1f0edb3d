#include <catch_amalgamated.hpp>

#include <cmath>

#include "dagmm_ho/numcore/finite_difference.hpp"
#include "dagmm_ho/numcore/kmeans.hpp"
#include "dagmm_ho/numcore/linalg.hpp"
#include "dagmm_ho/numcore/rng.hpp"
#include "oracles.hpp"

using namespace dagmm_ho;
using Catch::Approx;

namespace {

Matrix reconstruct(const EigenDecomposition& e) {
  const std::size_t n = e.values.size();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) out(i, j) += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
  return out;
}

Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix a = oracle::random_matrix(n, n, rng);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_CASE("eigendecompose_symmetric: identity and diagonal", "[numcore][eigen]") {
  auto id = eigendecompose_symmetric(Matrix::identity(3));
  for (double v : id.values) REQUIRE(v == Approx(1.0));

  auto diag = eigendecompose_symmetric(Matrix{{1.0, 0.0}, {0.0, 4.0}});
  REQUIRE(diag.values[0] == Approx(4.0));
  REQUIRE(diag.values[1] == Approx(1.0));
  REQUIRE(std::abs(diag.vectors(1, 0)) == Approx(1.0));
  REQUIRE(std::abs(diag.vectors(0, 1)) == Approx(1.0));
}

TEST_CASE("eigendecompose_symmetric: reconstruction and orthonormality", "[numcore][eigen]") {
  Rng rng(RngSeed{7});
  for (std::size_t n : {2u, 5u, 9u, 14u, 20u}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix a = n == 5 ? oracle::random_spd(n, rng) : random_symmetric(n, rng);
      const auto e = eigendecompose_symmetric(a);
      const double scale = frobenius_norm(a);
      REQUIRE(frobenius_norm(reconstruct(e) - a) <= 1e-8 * scale);
      for (std::size_t i = 1; i < n; ++i) REQUIRE(e.values[i - 1] >= e.values[i]);
      const Matrix gram = matmul(e.vectors.transpose(), e.vectors);
      REQUIRE(frobenius_norm(gram - Matrix::identity(n)) <= 1e-8);
      // A v_i = lambda_i v_i
      for (std::size_t i = 0; i < n; ++i) {
        double err = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          double av = 0.0;
          for (std::size_t c = 0; c < n; ++c) av += a(r, c) * e.vectors(c, i);
          err = std::max(err, std::abs(av - e.values[i] * e.vectors(r, i)));
        }
        REQUIRE(err <= 1e-8 * scale);
      }
    }
  }
}

TEST_CASE("eigendecompose_symmetric: rejects non-square input", "[numcore][eigen]") {
  REQUIRE_THROWS_AS(eigendecompose_symmetric(Matrix(2, 3)), DimensionError);
}

TEST_CASE("cholesky: known factors and errors", "[numcore][cholesky]") {
  REQUIRE(cholesky(Matrix::identity(3)) == Matrix::identity(3));

  const Matrix l = cholesky(Matrix{{4.0, 2.0}, {2.0, 3.0}});
  REQUIRE(l(0, 0) == Approx(2.0));
  REQUIRE(l(0, 1) == 0.0);
  REQUIRE(l(1, 0) == Approx(1.0));
  REQUIRE(l(1, 1) == Approx(std::sqrt(2.0)));

  REQUIRE_THROWS_AS(cholesky(Matrix{{1.0, 2.0}, {2.0, 1.0}}), NumericError);
  REQUIRE_THROWS_AS(cholesky(Matrix(2, 3)), DimensionError);
}

TEST_CASE("cholesky: round trip on random SPD matrices", "[numcore][cholesky]") {
  Rng rng(RngSeed{11});
  for (std::size_t n = 1; n <= 20; ++n) {
    const Matrix a = oracle::random_spd(n, rng);
    const Matrix l = cholesky(a);
    REQUIRE(frobenius_norm(matmul(l, l.transpose()) - a) <= 1e-8 * frobenius_norm(a));
    for (std::size_t i = 0; i < n; ++i) REQUIRE(l(i, i) > 0.0);
    const Matrix inv = cholesky_inverse(l);
    REQUIRE(frobenius_norm(matmul(inv, a) - Matrix::identity(n)) <= 1e-8 * n);
    double det = 0.0;
    oracle::inverse(a, &det);
    REQUIRE(cholesky_log_det(l) == Approx(std::log(det)).epsilon(1e-10));
  }
}

TEST_CASE("kmeans: k=1 gives the column mean", "[numcore][kmeans]") {
  Rng rng(RngSeed{3});
  const Matrix data = oracle::random_matrix(30, 3, rng);
  const auto result = kmeans(data, 1, RngSeed{1});
  const Vector mean = column_means(data);
  double total = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) total += squared_distance(data.row(r), mean);
  for (std::size_t c = 0; c < 3; ++c) REQUIRE(result.centroids(0, c) == Approx(mean[c]).margin(1e-12));
  REQUIRE(result.inertia == Approx(total).epsilon(1e-12));
}

TEST_CASE("kmeans: separated blobs are recovered exactly", "[numcore][kmeans]") {
  const auto blobs = oracle::make_blobs(2, 50, 2, 10.0, 1.0, RngSeed{5});
  const auto result = kmeans(blobs.data, 2, RngSeed{9});
  const std::size_t first = result.assignment[0];
  for (std::size_t i = 0; i < blobs.labels.size(); ++i)
    REQUIRE((result.assignment[i] == first) == (blobs.labels[i] == blobs.labels[0]));
}

TEST_CASE("kmeans: k equal to rows has zero inertia", "[numcore][kmeans]") {
  Rng rng(RngSeed{4});
  const Matrix data = oracle::random_matrix(12, 2, rng);
  REQUIRE(kmeans(data, 12, RngSeed{2}).inertia == 0.0);
}

TEST_CASE("kmeans: determinism, monotone inertia and errors", "[numcore][kmeans]") {
  Rng rng(RngSeed{8});
  const Matrix data = oracle::random_matrix(200, 4, rng);
  const auto a = kmeans(data, 5, RngSeed{77});
  const auto b = kmeans(data, 5, RngSeed{77});
  REQUIRE(a.assignment == b.assignment);
  REQUIRE(a.inertia == b.inertia);
  for (std::size_t i = 1; i < a.inertia_trace.size(); ++i) REQUIRE(a.inertia_trace[i] <= a.inertia_trace[i - 1]);
  // Every row sits with its nearest centroid.
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const double own = squared_distance(data.row(r), a.centroids.row(a.assignment[r]));
    for (std::size_t c = 0; c < 5; ++c) REQUIRE(own <= squared_distance(data.row(r), a.centroids.row(c)));
  }
  REQUIRE_THROWS_AS(kmeans(data, 0, RngSeed{1}), ParameterError);
  REQUIRE_THROWS_AS(kmeans(Matrix(3, 2), 4, RngSeed{1}), ParameterError);
}

TEST_CASE("finite_difference_gradient: closed-form functions", "[numcore][fd]") {
  auto sq = [](const Vector& p) { return p[0] * p[0] + p[1] * p[1]; };
  const Vector g = finite_difference_gradient(sq, {1.0, 2.0});
  REQUIRE(g[0] == Approx(2.0).margin(1e-8));
  REQUIRE(g[1] == Approx(4.0).margin(1e-8));

  auto tanh_sum = [](const Vector& p) {
    double s = 0.0;
    for (double v : p) s += std::tanh(v);
    return s;
  };
  for (double v : finite_difference_gradient(tanh_sum, Vector(4, 0.0))) REQUIRE(v == Approx(1.0).margin(1e-8));

  auto bad = [](const Vector& p) { return p[0] > 0 ? std::log(-1.0) : 0.0; };
  REQUIRE_THROWS_AS(finite_difference_gradient(bad, {0.0}), NumericError);
  REQUIRE_THROWS_AS(finite_difference_gradient(sq, {0.0, 0.0}, 0.0), ParameterError);
}

TEST_CASE("rng: identical seeds give identical streams", "[numcore][rng]") {
  Rng a(RngSeed{123});
  Rng b(RngSeed{123});
  Rng c(RngSeed{124});
  bool differs = false;
  bool same = true;
  for (int i = 0; i < 1'000'000; ++i) {
    const auto x = a.next_u64();
    same &= x == b.next_u64();
    differs |= x != c.next_u64();
  }
  REQUIRE(same);
  REQUIRE(differs);
  // xoshiro256** seeded by splitmix64(12345), computed by an independent
  // big-integer implementation; pins the stream across builds.
  Rng pinned(RngSeed{12345});
  REQUIRE(pinned.next_u64() == 0xbe6a36374160d49bULL);
  REQUIRE(pinned.next_u64() == 0x214aaa0637a688c6ULL);
  REQUIRE(pinned.next_u64() == 0xf69d16de9954d388ULL);
  const double u = Rng(RngSeed{5}).uniform();
  REQUIRE((u >= 0.0 && u < 1.0));
  REQUIRE(derive_seed(RngSeed{1}, 0) != derive_seed(RngSeed{1}, 1));
}
