#pragma once

// Per-sample RMSPE of the estimators on a dataset, and the three parameter
// sweeps (snapshot count, source separation, steering mismatch).
//
// Trial i of an evaluation or a sweep point always draws from
// Rng::derive(eval_seed, i), so a snapshot sweep at the training T, or a
// mismatch sweep at sigma = 0, reproduces the samples of a dataset simulated
// with seed = eval_seed.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "damusic/classical.hpp"
#include "damusic/damusic.hpp"
#include "damusic/errors.hpp"
#include "damusic/experiment/config.hpp"
#include "damusic/loss.hpp"
#include "damusic/signal.hpp"

namespace damusic::experiment {

enum class Estimator { damusic, music, bartlett, random };

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::damusic: return "damusic";
    case Estimator::music: return "music";
    case Estimator::bartlett: return "bartlett";
    case Estimator::random: return "random";
  }
  return "?";
}

/// Comma-separated list, e.g. "damusic,music". Order is preserved.
inline std::vector<Estimator> parse_estimators(const std::string& list) {
  std::vector<Estimator> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "damusic") {
      out.push_back(Estimator::damusic);
    } else if (item == "music") {
      out.push_back(Estimator::music);
    } else if (item == "bartlett") {
      out.push_back(Estimator::bartlett);
    } else if (item == "random") {
      out.push_back(Estimator::random);
    } else {
      throw ConfigError("--estimators", "unknown estimator '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--estimators", "empty estimator list");
  return out;
}

/// Key mixed into eval_seed for the random-guess baseline's stream.
inline constexpr std::uint64_t kRandomEstimatorKey = 0x52414E44ULL;

/// Everything an estimator needs besides the sample itself.
class EstimatorBench {
 public:
  EstimatorBench(std::size_t m, std::size_t d, std::uint64_t eval_seed, DaMusicModel* model = nullptr,
                 std::size_t grid_size = kDefaultGridSize)
      : d_(d), eval_seed_(eval_seed), model_(model), grid_(m, model ? model->config().grid_size : grid_size) {
    if (model_ && (model_->config().m != m || model_->config().d != d)) {
      throw ConfigError("checkpoint", "model (m, d) does not match the data");
    }
  }

  RealVector estimate(Estimator e, const SnapshotMatrix& x, std::size_t trial) const {
    switch (e) {
      case Estimator::damusic:
        if (!model_) throw ConfigError("--checkpoint", "damusic estimator requires a checkpoint");
        return model_->predict(x);
      case Estimator::music: return music_estimate(x, d_, grid_).angles;
      case Estimator::bartlett: return bartlett_estimate(x, d_, grid_).angles;
      case Estimator::random: {
        Rng rng = Rng::derive(eval_seed_ ^ kRandomEstimatorKey, trial);
        return random_estimate(d_, rng);
      }
    }
    return {};
  }

  double error(Estimator e, const LabeledSample& s, std::size_t trial) const {
    return rmspe(s.theta, estimate(e, s.x, trial)).value;
  }

 private:
  std::size_t d_;
  std::uint64_t eval_seed_;
  DaMusicModel* model_;
  GridSteering grid_;
};

struct EvaluationRow {
  std::size_t sample_id = 0;
  Estimator estimator = Estimator::music;
  double rmspe_rad = 0.0;
};

struct EvaluationSummary {
  Estimator estimator = Estimator::music;
  double mean = 0.0;
  double median = 0.0;
};

struct Evaluation {
  std::vector<EvaluationRow> rows;  // sample-major, estimator order as requested
  std::vector<EvaluationSummary> summary;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline Evaluation evaluate_samples(std::span<const LabeledSample> samples, const std::vector<Estimator>& estimators,
                                   const EstimatorBench& bench) {
  Evaluation out;
  std::vector<std::vector<double>> per(estimators.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t k = 0; k < estimators.size(); ++k) {
      const double err = bench.error(estimators[k], samples[i], i);
      out.rows.push_back({i, estimators[k], err});
      per[k].push_back(err);
    }
  }
  for (std::size_t k = 0; k < estimators.size(); ++k) out.summary.push_back({estimators[k], mean_of(per[k]), median_of(per[k])});
  return out;
}

struct SweepRow {
  double sweep_value = 0.0;
  Estimator estimator = Estimator::music;
  double mean_rmspe = 0.0;
};

/// Test sample for trial i at one sweep point.
inline LabeledSample sweep_sample(const Scenario& base, SweepKind kind, double point, std::uint64_t eval_seed,
                                  std::size_t trial) {
  Scenario scn = base;
  scn.seed = eval_seed;
  Rng rng = Rng::derive(eval_seed, trial);
  switch (kind) {
    case SweepKind::snapshots:
      scn.T = static_cast<std::size_t>(point);
      return generate_sample(scn, rng, ArrayResponse(scn));
    case SweepKind::mismatch:
      scn.steering_noise_sigma = point;
      return generate_sample(scn, rng, ArrayResponse(scn));
    case SweepKind::delta_theta:
      return generate_spaced_sample(scn, point, rng, ArrayResponse(scn));
  }
  throw InvalidInputError("sweep_sample: unknown sweep kind");
}

inline std::vector<SweepRow> run_sweep(const Scenario& base, const SweepSettings& sweep, std::uint64_t eval_seed,
                                       const std::vector<Estimator>& estimators, const EstimatorBench& bench) {
  std::vector<SweepRow> rows;
  for (double point : sweep.points) {
    std::vector<double> acc(estimators.size(), 0.0);
    for (std::size_t i = 0; i < sweep.trials_per_point; ++i) {
      const LabeledSample s = sweep_sample(base, sweep.kind, point, eval_seed, i);
      for (std::size_t k = 0; k < estimators.size(); ++k) acc[k] += bench.error(estimators[k], s, i);
    }
    for (std::size_t k = 0; k < estimators.size(); ++k) {
      rows.push_back({point, estimators[k], acc[k] / static_cast<double>(sweep.trials_per_point)});
    }
  }
  return rows;
}

}  // namespace damusic::experiment
