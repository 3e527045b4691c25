#pragma once

// File-level operations behind the `damusic` CLI subcommands.
//
// CSV outputs start with one '#' comment line carrying the format version and
// the experiment config hash, then a header row. Numbers use the shortest
// round-trip decimal form.
//
//   train log : epoch,train_loss,val_loss
//   evaluate  : sample_id,estimator,rmspe_rad   (+ rows "mean,<est>,v" and "median,<est>,v")
//   sweep     : sweep_value,estimator,mean_rmspe

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "damusic/damusic.hpp"
#include "damusic/errors.hpp"
#include "damusic/experiment/checkpoint.hpp"
#include "damusic/experiment/config.hpp"
#include "damusic/experiment/evaluate.hpp"
#include "damusic/experiment/format.hpp"
#include "damusic/experiment/train.hpp"
#include "damusic/signal.hpp"

namespace damusic::experiment {

inline constexpr int kCsvFormatVersion = 1;

namespace detail {

inline std::string csv_preamble(const char* kind, std::uint64_t hash) {
  return std::string("# damusic ") + kind + " format_version=" + std::to_string(kCsvFormatVersion) +
         " config_hash=" + hex64(hash) + "\n";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  damusic::detail::write_file(path, std::vector<char>(text.begin(), text.end()));
}

inline void require_matching_scenario(const Scenario& data, const Scenario& cfg) {
  if (data.m != cfg.m) throw ConfigError("scenario.m", "dataset has m=" + std::to_string(data.m));
  if (data.d != cfg.d) throw ConfigError("scenario.d", "dataset has d=" + std::to_string(data.d));
}

}  // namespace detail

struct SimulateResult {
  std::size_t samples = 0;
  std::uint64_t config_hash = 0;
};

inline SimulateResult cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_path,
                                   std::ostream* log = nullptr) {
  cfg.validate();
  Dataset ds = generate_dataset(cfg.scenario, cfg.dataset_size);
  ds.config_hash = config_hash(cfg);
  write_dataset(out_path, ds);
  if (log) {
    const Scenario& s = cfg.scenario;
    *log << "simulated L=" << ds.samples.size() << " m=" << s.m << " d=" << s.d << " T=" << s.T
         << " snr_db=" << format_double(s.snr_db) << " coherent=" << (s.coherent ? "true" : "false")
         << " seed=" << s.seed << " -> " << out_path.string() << "\n";
  }
  return {ds.samples.size(), ds.config_hash};
}

struct TrainCommandResult {
  TrainReport report;
  std::filesystem::path checkpoint;
  std::filesystem::path log_csv;
};

/// Training log lives next to the checkpoint: "<checkpoint>.log.csv".
inline std::filesystem::path train_log_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".log.csv");
}

/// The first floor(train_fraction * L) samples train, the rest validate.
inline TrainCommandResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& dataset_path,
                                    const std::filesystem::path& checkpoint_out, std::uint64_t train_seed,
                                    const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                                    std::ostream* log = nullptr) {
  cfg.validate();
  const Dataset ds = read_dataset(dataset_path);
  detail::require_matching_scenario(ds.scenario, cfg.scenario);

  std::optional<DaMusicModel> model;
  if (resume_from) {
    LoadedCheckpoint ck = load_checkpoint(*resume_from);
    if (!(ck.model.config() == cfg.model)) throw ConfigError("model", "resume checkpoint has a different architecture");
    model.emplace(std::move(ck.model));
  } else {
    Rng init(train_seed);
    model.emplace(cfg.model, init);
  }

  const auto n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(cfg.train.train_fraction * static_cast<double>(ds.samples.size()))));
  const std::span<const LabeledSample> all(ds.samples);
  const auto train = all.first(std::min(n_train, all.size()));
  const auto val = all.subspan(train.size());

  TrainOptions opt;
  opt.adam.lr = cfg.train.lr;
  opt.batch_size = cfg.train.batch_size;
  opt.epochs = cfg.train.epochs;
  opt.seed = train_seed;

  const std::uint64_t hash = config_hash(cfg);
  std::string csv = detail::csv_preamble("train", hash) + "epoch,train_loss,val_loss\n";
  TrainCommandResult result;
  result.report = train_model(*model, train, val, opt, [&](const EpochRecord& r) {
    csv += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_loss) + "\n";
    if (log) {
      *log << "epoch " << r.epoch << " train " << format_double(r.train_loss) << " val " << format_double(r.val_loss)
           << "\n";
      log->flush();
    }
  });

  const EpochRecord& last = result.report.log.back();
  TrainingMetadata meta;
  meta.epochs_run = last.epoch;
  meta.best_epoch = result.report.best_epoch;
  meta.final_train_loss = last.train_loss;
  meta.final_val_loss = last.val_loss;
  meta.dataset_seed = ds.scenario.seed;
  meta.train_seed = train_seed;
  meta.experiment_hash = hex64(hash);

  result.checkpoint = checkpoint_out;
  result.log_csv = train_log_path(checkpoint_out);
  save_checkpoint(checkpoint_out, *model, meta);
  detail::write_text(result.log_csv, csv);
  return result;
}

inline std::string evaluation_csv(const Evaluation& ev, std::uint64_t hash) {
  std::string csv = detail::csv_preamble("evaluate", hash) + "sample_id,estimator,rmspe_rad\n";
  for (const auto& r : ev.rows) csv += std::to_string(r.sample_id) + "," + to_string(r.estimator) + "," + format_double(r.rmspe_rad) + "\n";
  for (const auto& s : ev.summary) csv += "mean," + to_string(s.estimator) + "," + format_double(s.mean) + "\n";
  for (const auto& s : ev.summary) csv += "median," + to_string(s.estimator) + "," + format_double(s.median) + "\n";
  return csv;
}

inline Evaluation cmd_evaluate(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                               const std::filesystem::path& dataset_path, const std::vector<Estimator>& estimators,
                               const std::filesystem::path& out_csv, std::ostream* log = nullptr) {
  cfg.validate();
  const Dataset ds = read_dataset(dataset_path);
  std::optional<DaMusicModel> model;
  if (checkpoint) model.emplace(load_checkpoint(*checkpoint).model);
  const bool wants_model = std::find(estimators.begin(), estimators.end(), Estimator::damusic) != estimators.end();
  if (wants_model && !model) throw ConfigError("--checkpoint", "damusic estimator requires a checkpoint");

  const EstimatorBench bench(ds.scenario.m, ds.scenario.d, cfg.train.eval_seed, model ? &*model : nullptr,
                             cfg.model.grid_size);
  const Evaluation ev = evaluate_samples(ds.samples, estimators, bench);
  detail::write_text(out_csv, evaluation_csv(ev, config_hash(cfg)));
  if (log) {
    for (const auto& s : ev.summary) {
      *log << to_string(s.estimator) << ": mean " << format_double(s.mean) << " median " << format_double(s.median)
           << " rad\n";
    }
  }
  return ev;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows, std::uint64_t hash) {
  std::string csv = detail::csv_preamble("sweep", hash) + "sweep_value,estimator,mean_rmspe\n";
  for (const auto& r : rows) csv += format_double(r.sweep_value) + "," + to_string(r.estimator) + "," + format_double(r.mean_rmspe) + "\n";
  return csv;
}

inline std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                                       const std::vector<Estimator>& estimators, const std::filesystem::path& out_csv,
                                       std::ostream* log = nullptr) {
  cfg.validate();
  if (!cfg.sweep) throw ConfigError("sweep", "config has no sweep section");
  std::optional<DaMusicModel> model;
  if (checkpoint) model.emplace(load_checkpoint(*checkpoint).model);
  const bool wants_model = std::find(estimators.begin(), estimators.end(), Estimator::damusic) != estimators.end();
  if (wants_model && !model) throw ConfigError("--checkpoint", "damusic estimator requires a checkpoint");

  const EstimatorBench bench(cfg.scenario.m, cfg.scenario.d, cfg.train.eval_seed, model ? &*model : nullptr,
                             cfg.model.grid_size);
  const auto rows = run_sweep(cfg.scenario, *cfg.sweep, cfg.train.eval_seed, estimators, bench);
  detail::write_text(out_csv, sweep_csv(rows, config_hash(cfg)));
  if (log) {
    for (const auto& r : rows) {
      *log << to_string(cfg.sweep->kind) << "=" << format_double(r.sweep_value) << " " << to_string(r.estimator) << " "
           << format_double(r.mean_rmspe) << "\n";
    }
  }
  return rows;
}

}  // namespace damusic::experiment
