#pragma once

// Experiment configuration (UTF-8 JSON). Unknown fields are rejected.
//
// {
//   "scenario": {"m": 8, "d": 2, "T": 50, "snr_db": 10, "coherent": true,
//                "doa_range": [-1.5707963267948966, 1.5707963267948966],
//                "steering_noise_sigma": 0, "seed": 1},
//   "dataset_size": 10000,
//   "model": {"grid_size": 360, "gru_hidden": 16, "mlp_hidden": 16, "spectrum_eps": 1e-8},
//   "train": {"lr": 0.001, "batch_size": 16, "epochs": 50, "train_fraction": 0.9, "eval_seed": 7},
//   "sweep": {"kind": "snapshots", "points": [10, 50, 200], "trials_per_point": 200}
// }
//
// Only "scenario" is required. model.m / model.d default to the scenario's
// and must agree with it when given.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "damusic/damusic.hpp"
#include "damusic/errors.hpp"
#include "damusic/experiment/format.hpp"
#include "damusic/signal.hpp"

namespace damusic::experiment {

using json = nlohmann::json;

enum class SweepKind { snapshots, delta_theta, mismatch };

inline std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::snapshots: return "snapshots";
    case SweepKind::delta_theta: return "delta_theta";
    case SweepKind::mismatch: return "mismatch";
  }
  return "?";
}

struct TrainSettings {
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  double train_fraction = 0.9;
  std::uint64_t eval_seed = 7;

  friend bool operator==(const TrainSettings&, const TrainSettings&) = default;
};

struct SweepSettings {
  SweepKind kind = SweepKind::snapshots;
  std::vector<double> points;
  std::size_t trials_per_point = 100;

  friend bool operator==(const SweepSettings&, const SweepSettings&) = default;
};

struct ExperimentConfig {
  Scenario scenario;
  std::size_t dataset_size = 10000;
  DaMusicConfig model;
  TrainSettings train;
  std::optional<SweepSettings> sweep;

  void validate() const {
    scenario.validate();
    if (dataset_size < 1) throw ConfigError("dataset_size", "must be >= 1");
    model.validate();
    if (model.m != scenario.m) throw ConfigError("model.m", "must equal scenario.m");
    if (model.d != scenario.d) throw ConfigError("model.d", "must equal scenario.d");
    if (!(train.lr >= 0.0) || !std::isfinite(train.lr)) throw ConfigError("train.lr", "must be finite and >= 0");
    if (train.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (!(train.train_fraction > 0.0 && train.train_fraction < 1.0)) {
      throw ConfigError("train.train_fraction", "must lie strictly between 0 and 1");
    }
    if (sweep) {
      if (sweep->points.empty()) throw ConfigError("sweep.points", "must be nonempty");
      if (sweep->trials_per_point < 1) throw ConfigError("sweep.trials_per_point", "must be >= 1");
      for (double p : sweep->points) {
        if (!std::isfinite(p)) throw ConfigError("sweep.points", "must be finite");
        if (sweep->kind == SweepKind::snapshots && (p < 1.0 || p != std::floor(p))) {
          throw ConfigError("sweep.points", "snapshot counts must be positive integers");
        }
        if (sweep->kind == SweepKind::delta_theta &&
            !(p > 0.0 && static_cast<double>(scenario.d - 1) * p < scenario.doa_hi - scenario.doa_lo)) {
          throw ConfigError("sweep.points", "delta_theta must be positive and fit the DoA range");
        }
        if (sweep->kind == SweepKind::mismatch && p < 0.0) throw ConfigError("sweep.points", "sigma must be >= 0");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) throw ConfigError(where.empty() ? key : where + "." + key, "unknown field");
  }
}

template <class T>
void read_field(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  const std::string path = where.empty() ? std::string(key) : where + "." + key;
  try {
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(path, "must be >= 0");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path, "expected a number");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace detail

inline json to_json(const Scenario& s) {
  return json{{"m", s.m},
              {"d", s.d},
              {"T", s.T},
              {"snr_db", s.snr_db},
              {"coherent", s.coherent},
              {"doa_range", {s.doa_lo, s.doa_hi}},
              {"steering_noise_sigma", s.steering_noise_sigma},
              {"seed", s.seed}};
}

inline Scenario scenario_from_json(const json& j) {
  detail::reject_unknown(j, "scenario", {"m", "d", "T", "snr_db", "coherent", "doa_range", "steering_noise_sigma", "seed"});
  for (const char* req : {"m", "d", "T"}) {
    if (!j.contains(req)) throw ConfigError(std::string("scenario.") + req, "required field missing");
  }
  Scenario s;
  detail::read_field(j, "m", "scenario", s.m);
  detail::read_field(j, "d", "scenario", s.d);
  detail::read_field(j, "T", "scenario", s.T);
  detail::read_field(j, "snr_db", "scenario", s.snr_db);
  detail::read_field(j, "coherent", "scenario", s.coherent);
  detail::read_field(j, "steering_noise_sigma", "scenario", s.steering_noise_sigma);
  detail::read_field(j, "seed", "scenario", s.seed);
  if (j.contains("doa_range")) {
    const json& r = j.at("doa_range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      throw ConfigError("scenario.doa_range", "expected [lo, hi]");
    }
    s.doa_lo = r[0].get<double>();
    s.doa_hi = r[1].get<double>();
  }
  return s;
}

inline json to_json(const DaMusicConfig& c) {
  return json{{"m", c.m},
              {"d", c.d},
              {"grid_size", c.grid_size},
              {"gru_hidden", c.gru_hidden},
              {"mlp_hidden", c.mlp_hidden},
              {"spectrum_eps", c.spectrum_eps}};
}

/// Model section; m and d default to the given scenario.
inline DaMusicConfig model_from_json(const json& j, const Scenario& scn) {
  DaMusicConfig c = DaMusicConfig::for_array(scn.m, scn.d);
  if (j.is_null()) return c;
  detail::reject_unknown(j, "model", {"m", "d", "grid_size", "gru_hidden", "mlp_hidden", "spectrum_eps"});
  detail::read_field(j, "m", "model", c.m);
  detail::read_field(j, "d", "model", c.d);
  detail::read_field(j, "grid_size", "model", c.grid_size);
  detail::read_field(j, "gru_hidden", "model", c.gru_hidden);
  detail::read_field(j, "mlp_hidden", "model", c.mlp_hidden);
  detail::read_field(j, "spectrum_eps", "model", c.spectrum_eps);
  return c;
}

inline DaMusicConfig model_from_json(const json& j) {
  detail::reject_unknown(j, "model", {"m", "d", "grid_size", "gru_hidden", "mlp_hidden", "spectrum_eps"});
  for (const char* req : {"m", "d"}) {
    if (!j.contains(req)) throw ConfigError(std::string("model.") + req, "required field missing");
  }
  Scenario scn;
  detail::read_field(j, "m", "model", scn.m);
  detail::read_field(j, "d", "model", scn.d);
  return model_from_json(j, scn);
}

inline json to_json(const ExperimentConfig& cfg) {
  json j{{"scenario", to_json(cfg.scenario)},
         {"dataset_size", cfg.dataset_size},
         {"model", to_json(cfg.model)},
         {"train",
          {{"lr", cfg.train.lr},
           {"batch_size", cfg.train.batch_size},
           {"epochs", cfg.train.epochs},
           {"train_fraction", cfg.train.train_fraction},
           {"eval_seed", cfg.train.eval_seed}}}};
  if (cfg.sweep) {
    j["sweep"] = {{"kind", to_string(cfg.sweep->kind)},
                  {"points", cfg.sweep->points},
                  {"trials_per_point", cfg.sweep->trials_per_point}};
  }
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  detail::reject_unknown(j, "", {"scenario", "dataset_size", "model", "train", "sweep"});
  if (!j.contains("scenario")) throw ConfigError("scenario", "required section missing");
  ExperimentConfig cfg;
  cfg.scenario = scenario_from_json(j.at("scenario"));
  detail::read_field(j, "dataset_size", "", cfg.dataset_size);
  cfg.model = model_from_json(j.contains("model") ? j.at("model") : json(), cfg.scenario);
  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::reject_unknown(t, "train", {"lr", "batch_size", "epochs", "train_fraction", "eval_seed"});
    detail::read_field(t, "lr", "train", cfg.train.lr);
    detail::read_field(t, "batch_size", "train", cfg.train.batch_size);
    detail::read_field(t, "epochs", "train", cfg.train.epochs);
    detail::read_field(t, "train_fraction", "train", cfg.train.train_fraction);
    detail::read_field(t, "eval_seed", "train", cfg.train.eval_seed);
  }
  if (j.contains("sweep") && !j.at("sweep").is_null()) {
    const json& s = j.at("sweep");
    detail::reject_unknown(s, "sweep", {"kind", "points", "trials_per_point"});
    SweepSettings sw;
    if (!s.contains("kind") || !s.at("kind").is_string()) throw ConfigError("sweep.kind", "required string field");
    const std::string kind = s.at("kind").get<std::string>();
    if (kind == "snapshots") {
      sw.kind = SweepKind::snapshots;
    } else if (kind == "delta_theta") {
      sw.kind = SweepKind::delta_theta;
    } else if (kind == "mismatch") {
      sw.kind = SweepKind::mismatch;
    } else {
      throw ConfigError("sweep.kind", "expected one of snapshots | delta_theta | mismatch");
    }
    if (!s.contains("points") || !s.at("points").is_array()) throw ConfigError("sweep.points", "required array field");
    for (const auto& p : s.at("points")) {
      if (!p.is_number()) throw ConfigError("sweep.points", "entries must be numbers");
      sw.points.push_back(p.get<double>());
    }
    detail::read_field(s, "trials_per_point", "sweep", sw.trials_per_point);
    cfg.sweep = sw;
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a of the canonical (sorted-key, compact) JSON dump.
inline std::uint64_t config_hash(const json& j) { return fnv1a64(j.dump()); }
inline std::uint64_t config_hash(const ExperimentConfig& cfg) { return config_hash(to_json(cfg)); }
inline std::uint64_t config_hash(const DaMusicConfig& cfg) { return config_hash(to_json(cfg)); }

}  // namespace damusic::experiment
