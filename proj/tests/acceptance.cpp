// Acceptance suite: one PASS/FAIL line per criterion; exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>

#include "dagmm_ho/cli/pipeline.hpp"
#include "dagmm_ho/dagmm/gmm.hpp"
#include "dagmm_ho/eval/baselines.hpp"
#include "dagmm_ho/eval/metrics.hpp"
#include "dagmm_ho/hpo/bending_point.hpp"
#include "dagmm_ho/hpo/gap.hpp"
#include "dagmm_ho/hpo/variance.hpp"
#include "oracles.hpp"
#include "tiny_dagmm.hpp"

using namespace dagmm_ho;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = tiny::gradient_check(NetworkArchitecture::standard(4, 1, 2), RngSeed{2024});
  const double secs = elapsed(t0);
  return {r.max_relative_error < 1e-4 && secs < 10.0,
          fmt("max relative error %.3g over %zu parameters, %.2f s", r.max_relative_error, r.parameters, secs)};
}

Outcome energy_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(RngSeed{77});
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(4);
    const std::size_t d = 1 + rng.uniform_index(4);
    GmmParameters g;
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      g.phi.push_back(0.1 + rng.uniform());
      total += g.phi.back();
      g.mu.push_back(oracle::random_matrix(1, d, rng).data());
      g.sigma.push_back(0.3 * oracle::random_spd(d, rng));
    }
    for (double& p : g.phi) p /= total;
    const Vector z = oracle::random_matrix(1, d, rng).data();
    const double jitter = 1e-6;
    std::vector<Matrix> regularized = g.sigma;
    for (auto& s : regularized)
      for (std::size_t i = 0; i < d; ++i) s(i, i) += jitter;
    worst = std::max(worst, std::abs(sample_energy(z, g, jitter) - oracle::naive_energy(z, g.phi, g.mu, regularized)));
  }
  const double secs = elapsed(t0);
  return {worst < 1e-8 && secs < 5.0, fmt("max |difference| %.3g on 100 mixtures, %.2f s", worst, secs)};
}

Outcome gmm_estimation_oracle() {
  Rng rng(RngSeed{303});
  double worst = 0.0;
  for (int batch = 0; batch < 50; ++batch) {
    const std::size_t n = 10 + rng.uniform_index(40);
    const std::size_t d = 1 + rng.uniform_index(4);
    const std::size_t k = 1 + rng.uniform_index(4);
    const Matrix z = oracle::random_matrix(n, d, rng, 2.0);
    Matrix gamma(n, k);
    std::vector<std::vector<std::size_t>> groups(k);
    for (std::size_t i = 0; i < n; ++i) {
      // every component keeps at least one row
      const std::size_t c = i < k ? i : rng.uniform_index(k);
      gamma(i, c) = 1.0;
      groups[c].push_back(i);
    }
    const auto est = estimate_gmm(z, gamma);
    for (std::size_t c = 0; c < k; ++c) {
      const Matrix part = z.select_rows(groups[c]);
      const double m = static_cast<double>(part.rows());
      worst = std::max(worst, std::abs(est.gmm.phi[c] - m / static_cast<double>(n)));
      Vector mean(d, 0.0);
      for (std::size_t i = 0; i < part.rows(); ++i)
        for (std::size_t a = 0; a < d; ++a) mean[a] += part(i, a) / m;
      for (std::size_t a = 0; a < d; ++a) {
        worst = std::max(worst, std::abs(est.gmm.mu[c][a] - mean[a]));
        for (std::size_t b = 0; b < d; ++b) {
          double cov = 0.0;
          for (std::size_t i = 0; i < part.rows(); ++i) cov += (part(i, a) - mean[a]) * (part(i, b) - mean[b]) / m;
          worst = std::max(worst, std::abs(est.gmm.sigma[c](a, b) - cov));
        }
      }
    }
  }
  return {worst < 1e-12, fmt("max |difference| %.3g over 50 batches", worst)};
}

Outcome dispersion_identity() {
  Rng rng(RngSeed{4});
  double worst = 0.0;
  for (std::size_t rows : {10u, 50u, 120u, 200u})
    for (std::size_t cols : {1u, 3u, 8u})
      for (std::size_t k : {1u, 3u, 6u}) {
        const Matrix data = oracle::random_matrix(rows, cols, rng);
        std::vector<std::size_t> labels(rows);
        for (auto& l : labels) l = rng.uniform_index(k);
        worst = std::max(worst, std::abs(dispersion(data, labels, k) - oracle::pairwise_dispersion(data, labels, k)));
      }
  return {worst < 1e-10, fmt("max |difference| %.3g on 36 cases up to 200x8", worst)};
}

Outcome gap_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  for (std::size_t k : {3u, 4u, 5u}) {
    std::size_t hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto blobs = oracle::make_blobs(k, 50, 2, 10.0, 1.0, RngSeed{1000 * k + seed});
      GapConfig cfg;
      cfg.seed = RngSeed{seed};
      hits += select_k(blobs.data, cfg).k == k;
    }
    ok = ok && hits >= 18;
    detail += fmt("k=%zu %zu/20; ", k, hits);
  }
  const double secs = elapsed(t0);
  return {ok && secs < 120.0, detail + fmt("%.1f s", secs)};
}

Curve curve_of(const std::function<double(double)>& f) {
  Curve c;
  for (int x = 1; x <= 10; ++x) {
    c.x.push_back(x);
    c.y.push_back(f(x));
  }
  return c;
}

Outcome bending_correctness() {
  const auto knee = bending_point(curve_of([](double x) { return std::min(x, 5.0); }));
  bool ok = knee.found() && *knee.x_star == 5.0;
  std::string detail = knee.found() ? fmt("min(x,5) -> %g", *knee.x_star) : "min(x,5) -> none";
  const std::vector<std::function<double(double)>> concave{
      [](double x) { return std::log1p(x); },      [](double x) { return std::sqrt(x); },
      [](double x) { return 1.0 - std::exp(-x / 2.0); }, [](double x) { return 1.0 - std::exp(-x / 4.0); },
      [](double x) { return x / (x + 3.0); },      [](double x) { return std::atan(x / 2.0); },
      [](double x) { return std::log(x); },        [](double x) { return -1.0 / x; },
  };
  std::size_t matches = 0;
  for (const auto& f : concave) {
    const Curve c = curve_of(f);
    const auto r = bending_point(c);
    matches += r.found() && *r.index == oracle::normalized_difference_argmax(c.x, c.y);
  }
  ok = ok && matches == concave.size();
  return {ok, detail + fmt("; concave argmax matches %zu/%zu", matches, concave.size())};
}

Outcome dimension_selection() {
  std::size_t hits = 0;
  std::string got;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t c = select_c(oracle::low_rank_embedding(1000, 10, 3, 0.01, RngSeed{500 + seed})).c;
    hits += c == 3;
    got += std::to_string(c);
  }
  return {hits == 10, fmt("c = 3 in %zu/10 seeds (selected %s)", hits, got.c_str())};
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  const fs::path root = fs::temp_directory_path() / "dagmm_ho_acceptance_e2e";
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    fs::remove_all(root);
    PipelineConfig cfg;
    cfg.seed = RngSeed{seed};
    cfg.data_dir = (root / "data").string();
    cfg.report_dir = (root / "reports").string();
    cfg.model = (root / "model.dghm").string();
    cmd_synth(cfg, cfg.data_dir);
    const TuningReport tr = cmd_tune(cfg, cfg.report_dir);
    cmd_train(cfg, cfg.model);
    const ComparisonRun run = cmd_eval(cfg, cfg.model, cfg.report_dir);
    const double proposed = run.table.row("Proposed").metrics.auc;
    bool seed_ok = proposed >= 0.90;
    std::string row = fmt("seed %llu K=%zu c=%zu Proposed %.3f", static_cast<unsigned long long>(seed), tr.k, tr.c, proposed);
    for (const auto& m : comparison_methods()) {
      if (m == "Proposed") continue;
      const double a = run.table.row(m).metrics.auc;
      seed_ok = seed_ok && proposed >= a;
      row += fmt(" %s %.3f", m.c_str(), a);
    }
    // mean energy of anomalous test segments above that of normal ones
    const auto& ls = run.scores.at("Proposed");
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < ls.scores.size(); ++i) (ls.labels[i] ? pos : neg) += ls.scores[i];
    pos /= static_cast<double>(ls.positives());
    neg /= static_cast<double>(ls.negatives());
    seed_ok = seed_ok && pos > neg;
    row += fmt(" energy anomalous %.2f > normal %.2f", pos, neg);
    std::printf("     8 %s%s\n", row.c_str(), seed_ok ? "" : "  <- ordering violated");
    std::fflush(stdout);
    ok = ok && seed_ok;
    detail += fmt("seed %llu %s; ", static_cast<unsigned long long>(seed), seed_ok ? "ok" : "violated");
  }
  fs::remove_all(root);
  const double secs = elapsed(t0);
  return {ok && secs < 900.0, detail + fmt("%.0f s", secs)};
}

Outcome auc_oracle() {
  Rng rng(RngSeed{9});
  std::size_t cases = 0, exact = 0;
  for (std::size_t n = 2; n <= 1000; n += n < 20 ? 1 : 97) {
    for (double grid : {3.0, 50.0, 1e9}) {
      LabeledScores ls;
      for (std::size_t i = 0; i < n; ++i) {
        ls.labels.push_back(rng.uniform() < 0.4);
        ls.scores.push_back(std::floor(rng.uniform() * grid));
      }
      ls.labels[0] = true;
      ls.labels[1] = false;
      ++cases;
      exact += auc(ls) == oracle::brute_force_auc(ls.scores, ls.labels);
    }
  }
  return {exact == cases, fmt("exact in %zu/%zu cases, N <= 1000, with ties", exact, cases)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "dagmm_ho_acceptance_det";
  fs::remove_all(root);
  PipelineConfig cfg;
  cfg.data_dir = (root / "data").string();
  cfg.report_dir = (root / "reports").string();
  cfg.synth.fans = 3;
  cfg.synth.duration = 20.0;
  cfg.synth.anomalies_per_fan = 4;
  cfg.k = 3;
  cfg.c = 4;
  cfg.train.epochs = 5;
  cmd_synth(cfg, cfg.data_dir);
  cmd_train(cfg, root / "a.dghm");
  cmd_train(cfg, root / "b.dghm");
  const auto a = read_file_bytes(root / "a.dghm");
  const auto b = read_file_bytes(root / "b.dghm");
  fs::remove_all(root);
  return {a == b && !a.empty(), fmt("two runs, %zu-byte model files %s", a.size(), a == b ? "identical" : "differ")};
}

Outcome em_monotonicity() {
  std::size_t violations = 0, iterations = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto blobs = oracle::make_blobs(3 + seed % 3, 80, 4, 3.0, 1.2, RngSeed{seed});
    const auto fit = fit_diagonal_gmm(blobs.data, 2 + seed % 5, RngSeed{seed});
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      ++iterations;
      violations += fit.log_likelihood[i] < fit.log_likelihood[i - 1] - 1e-10;
    }
  }
  return {violations == 0, fmt("%zu decreases over %zu iterations of 20 runs", violations, iterations)};
}

}  // namespace

int main() {
  run(1, "gradient oracle", gradient_oracle);
  run(2, "energy oracle", energy_oracle);
  run(3, "GMM estimation oracle", gmm_estimation_oracle);
  run(4, "dispersion identity", dispersion_identity);
  run(5, "gap statistic recovery", gap_recovery);
  run(6, "bending point correctness", bending_correctness);
  run(7, "dimension selection", dimension_selection);
  run(8, "end-to-end ordering", end_to_end);
  run(9, "AUC oracle", auc_oracle);
  run(10, "training determinism", determinism);
  run(11, "EM monotonicity", em_monotonicity);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
