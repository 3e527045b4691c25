// damusic: simulate / train / evaluate / sweep.
//
// Exit status: 0 success, 2 configuration or usage error, 1 runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "damusic/experiment/commands.hpp"

namespace {

namespace ex = damusic::experiment;

struct Options {
  std::string config;
  std::string dataset;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string estimators;
};

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

int run(CLI::App& app, const Options& o) {
  ex::ExperimentConfig cfg = ex::load_config(o.config);

  if (app.got_subcommand("simulate")) {
    if (o.seed) cfg.scenario.seed = *o.seed;
    ex::cmd_simulate(cfg, o.out, &std::cout);
  } else if (app.got_subcommand("train")) {
    const std::uint64_t seed = o.seed.value_or(cfg.scenario.seed);
    const auto res = ex::cmd_train(cfg, o.dataset, o.out, seed, optional_path(o.checkpoint), &std::cout);
    std::cout << "best epoch " << res.report.best_epoch << " val " << ex::format_double(res.report.best_val_loss)
              << " -> " << res.checkpoint.string() << " (log " << res.log_csv.string() << ")\n";
  } else if (app.got_subcommand("evaluate")) {
    if (o.seed) cfg.train.eval_seed = *o.seed;
    const std::string list = o.estimators.empty() ? (o.checkpoint.empty() ? "music,bartlett,random" : "damusic,music,bartlett,random")
                                                  : o.estimators;
    ex::cmd_evaluate(cfg, optional_path(o.checkpoint), o.dataset, ex::parse_estimators(list), o.out, &std::cout);
  } else if (app.got_subcommand("sweep")) {
    if (o.seed) cfg.train.eval_seed = *o.seed;
    const std::string list = o.estimators.empty() ? (o.checkpoint.empty() ? "music,bartlett,random" : "damusic,music,bartlett,random")
                                                  : o.estimators;
    ex::cmd_sweep(cfg, optional_path(o.checkpoint), ex::parse_estimators(list), o.out, &std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep-augmented MUSIC direction-of-arrival toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "Generate a labeled dataset from the config's scenario");
  simulate->add_option("--config", o.config, "Experiment config (JSON)")->required();
  simulate->add_option("--out", o.out, "Dataset file to write")->required();
  simulate->add_option("--seed", o.seed, "Override scenario.seed");

  auto* train = app.add_subcommand("train", "Train a deep-augmented MUSIC model");
  train->add_option("--config", o.config, "Experiment config (JSON)")->required();
  train->add_option("--dataset", o.dataset, "Training dataset")->required();
  train->add_option("--out", o.out, "Checkpoint to write; the log goes to <out>.log.csv")->required();
  train->add_option("--checkpoint", o.checkpoint, "Resume from this checkpoint");
  train->add_option("--seed", o.seed, "Initialization / shuffling seed (default scenario.seed)");

  auto* evaluate = app.add_subcommand("evaluate", "Per-sample RMSPE of each estimator on a dataset");
  evaluate->add_option("--config", o.config, "Experiment config (JSON)")->required();
  evaluate->add_option("--dataset", o.dataset, "Test dataset")->required();
  evaluate->add_option("--out", o.out, "CSV to write")->required();
  evaluate->add_option("--checkpoint", o.checkpoint, "Trained model (needed for the damusic estimator)");
  evaluate->add_option("--estimators", o.estimators, "Comma list of damusic,music,bartlett,random");
  evaluate->add_option("--seed", o.seed, "Override train.eval_seed");

  auto* sweep = app.add_subcommand("sweep", "Mean RMSPE per estimator over the config's sweep points");
  sweep->add_option("--config", o.config, "Experiment config (JSON) with a sweep section")->required();
  sweep->add_option("--out", o.out, "CSV to write")->required();
  sweep->add_option("--checkpoint", o.checkpoint, "Trained model (needed for the damusic estimator)");
  sweep->add_option("--estimators", o.estimators, "Comma list of damusic,music,bartlett,random");
  sweep->add_option("--seed", o.seed, "Override train.eval_seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run(app, o);
  } catch (const damusic::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
