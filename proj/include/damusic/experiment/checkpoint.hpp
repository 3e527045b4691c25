#pragma once

// Checkpoint file format (version 1):
//
//   line 1   compact UTF-8 JSON header terminated by '\n'
//   rest     parameter payload: every parameter's values, in header order,
//            as little-endian IEEE-754 binary64, no padding
//
// Header fields:
//   format          "damusic-checkpoint"
//   format_version  1
//   config          model config (m, d, grid_size, gru_hidden, mlp_hidden, spectrum_eps)
//   config_hash     hex FNV-1a of the compact config JSON; verified on load
//   params          [{"name", "shape", "count"}], in creation order
//   payload_bytes   8 * total parameter count
//   metadata        training provenance (epochs_run, best_epoch, final_train_loss,
//                   final_val_loss, dataset_seed, train_seed, experiment_hash)

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "damusic/damusic.hpp"
#include "damusic/errors.hpp"
#include "damusic/experiment/config.hpp"
#include "damusic/signal.hpp"

namespace damusic::experiment {

inline constexpr int kCheckpointFormatVersion = 1;

struct TrainingMetadata {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  std::uint64_t dataset_seed = 0;
  std::uint64_t train_seed = 0;
  std::string experiment_hash;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

namespace detail {
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double number_or_nan(const json& v) {
  return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace detail

inline std::vector<char> encode_checkpoint(const DaMusicModel& model, const TrainingMetadata& meta) {
  const json cfg = to_json(model.config());
  json params = json::array();
  std::size_t total = 0;
  for (const auto& e : model.params().entries()) {
    params.push_back({{"name", e.name}, {"shape", e.shape}, {"count", e.value.size()}});
    total += e.value.size();
  }
  const json header{{"format", "damusic-checkpoint"},
                    {"format_version", kCheckpointFormatVersion},
                    {"config", cfg},
                    {"config_hash", hex64(config_hash(cfg))},
                    {"params", params},
                    {"payload_bytes", 8 * total},
                    {"metadata",
                     {{"epochs_run", meta.epochs_run},
                      {"best_epoch", meta.best_epoch},
                      {"final_train_loss", detail::number_or_null(meta.final_train_loss)},
                      {"final_val_loss", detail::number_or_null(meta.final_val_loss)},
                      {"dataset_seed", meta.dataset_seed},
                      {"train_seed", meta.train_seed},
                      {"experiment_hash", meta.experiment_hash}}}};
  damusic::detail::ByteWriter w;
  const std::string text = header.dump() + "\n";
  w.raw(text.data(), text.size());
  for (const auto& e : model.params().entries())
    for (double v : e.value) w.f64(v);
  return std::move(w.buffer());
}

struct LoadedCheckpoint {
  DaMusicModel model;
  TrainingMetadata metadata;
};

inline LoadedCheckpoint decode_checkpoint(const std::vector<char>& bytes) {
  const auto newline = std::find(bytes.begin(), bytes.end(), '\n');
  if (newline == bytes.end()) throw PersistenceError("checkpoint: missing header line");
  json header;
  try {
    header = json::parse(bytes.begin(), newline);
  } catch (const json::exception& e) {
    throw PersistenceError(std::string("checkpoint: bad header: ") + e.what());
  }
  try {
    if (header.at("format") != "damusic-checkpoint") throw PersistenceError("checkpoint: not a damusic checkpoint");
    if (header.at("format_version") != kCheckpointFormatVersion) throw PersistenceError("checkpoint: unsupported format_version");
    const json& cfg_json = header.at("config");
    if (header.at("config_hash").get<std::string>() != hex64(config_hash(cfg_json))) {
      throw PersistenceError("checkpoint: config hash mismatch");
    }
    const DaMusicConfig cfg = model_from_json(cfg_json);
    Rng unused(0);
    LoadedCheckpoint out{DaMusicModel(cfg, unused), {}};

    const json& params = header.at("params");
    auto& entries = out.model.params().entries();
    if (params.size() != entries.size()) throw PersistenceError("checkpoint: parameter list does not match architecture");
    const std::size_t payload_offset = static_cast<std::size_t>(newline - bytes.begin()) + 1;
    damusic::detail::ByteReader r(bytes.data() + payload_offset, bytes.size() - payload_offset);
    if (r.remaining() != header.at("payload_bytes").get<std::size_t>() ||
        r.remaining() != 8 * out.model.params().scalar_count()) {
      throw PersistenceError("checkpoint: payload size mismatch");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (params[i].at("name") != entries[i].name || params[i].at("shape") != json(entries[i].shape)) {
        throw PersistenceError("checkpoint: parameter " + std::to_string(i) + " does not match architecture");
      }
      for (double& v : entries[i].value) v = r.f64();
    }
    const json& m = header.at("metadata");
    out.metadata.epochs_run = m.at("epochs_run").get<std::size_t>();
    out.metadata.best_epoch = m.at("best_epoch").get<std::size_t>();
    out.metadata.final_train_loss = detail::number_or_nan(m.at("final_train_loss"));
    out.metadata.final_val_loss = detail::number_or_nan(m.at("final_val_loss"));
    out.metadata.dataset_seed = m.at("dataset_seed").get<std::uint64_t>();
    out.metadata.train_seed = m.at("train_seed").get<std::uint64_t>();
    out.metadata.experiment_hash = m.at("experiment_hash").get<std::string>();
    return out;
  } catch (const json::exception& e) {
    throw PersistenceError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw PersistenceError(std::string("checkpoint: invalid config: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const DaMusicModel& model, const TrainingMetadata& meta) {
  damusic::detail::write_file(path, encode_checkpoint(model, meta));
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(damusic::detail::read_file(path));
}

}  // namespace damusic::experiment
