#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "dagmm_ho/cli/pipeline.hpp"

using namespace dagmm_ho;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int report(const std::exception& e, int code) {
  std::cerr << "dagmm_ho: " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DAGMM-HO acoustic anomaly detection"};
  app.footer("\n" + config_help() +
             "\nPrecedence: defaults < --config file < --set < DAGMM_HO_SEED < --seed.\n"
             "Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.");
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_dir, "output directory (synth: fixture, tune/eval: reports, train: model dir)");
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.add_option("--set", overrides, "override one config key, KEY=VALUE (repeatable)");

  auto* synth = app.add_subcommand("synth", "write the synthetic fan fixture and its manifest");
  auto* tune = app.add_subcommand("tune", "select K and c from normal training data");
  auto* train = app.add_subcommand("train", "train DAGMM on normal training segments");
  auto* score = app.add_subcommand("score", "per-segment energies for WAV files");
  std::vector<std::string> files;
  score->add_option("files", files, "WAV files to score");
  auto* eval = app.add_subcommand("eval", "compare the model against the baselines on the held-out split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  PipelineConfig cfg;
  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + o + "'");
      set_config_value(cfg, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    apply_seed_env(cfg);
    if (seed) cfg.seed = RngSeed{*seed};
  } catch (const Error& e) {
    return report(e, kUsage);
  }
  std::ostream* log = quiet ? nullptr : &std::cerr;

  try {
    if (synth->parsed()) {
      cmd_synth(cfg, out_dir.empty() ? std::filesystem::path(cfg.data_dir) : std::filesystem::path(out_dir), log);
    } else if (tune->parsed()) {
      cmd_tune(cfg, out_dir.empty() ? cfg.report_dir : out_dir, log);
    } else if (train->parsed()) {
      std::filesystem::path model = cfg.model;
      if (!out_dir.empty()) model = std::filesystem::path(out_dir) / model.filename();
      cmd_train(cfg, model, log);
    } else if (score->parsed()) {
      const std::string listing = format_scores(cmd_score(cfg, cfg.model, files));
      if (!out_dir.empty()) write_file_atomic(std::filesystem::path(out_dir) / "scores.tsv", listing);
      std::cout << listing;
    } else if (eval->parsed()) {
      const ComparisonRun run = cmd_eval(cfg, cfg.model, out_dir.empty() ? cfg.report_dir : out_dir, nullptr);
      if (!quiet) std::cout << format_comparison_text(run.table);
    }
  } catch (const ConfigError& e) {
    return report(e, kUsage);
  } catch (const ParameterError& e) {
    return report(e, kUsage);
  } catch (const NumericError& e) {
    return report(e, kNumeric);
  } catch (const Error& e) {
    return report(e, kData);
  } catch (const std::filesystem::filesystem_error& e) {
    return report(e, kData);
  }
  return kOk;
}
