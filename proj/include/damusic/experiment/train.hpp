#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "damusic/damusic.hpp"
#include "damusic/errors.hpp"
#include "damusic/loss.hpp"
#include "damusic/nn/adam.hpp"
#include "damusic/rng.hpp"
#include "damusic/signal.hpp"

namespace damusic::experiment {

struct TrainOptions {
  nn::AdamConfig adam;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;  // shuffling stream
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t adam_steps = 0;
  std::size_t degenerate_eig_pairs = 0;
};

/// Mean RMSPE of the model's estimates over a set of samples (no gradients).
inline double mean_rmspe(DaMusicModel& model, std::span<const LabeledSample> samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (const auto& s : samples) acc += rmspe(s.theta, model.predict(s.x)).value;
  return acc / static_cast<double>(samples.size());
}

/// Minibatch Adam on the mean batch RMSPE. Validation loss is evaluated after
/// every epoch (and once before training); the parameters with the lowest
/// validation loss are restored at the end. When `val` is empty the training
/// loss drives selection.
inline TrainReport train_model(DaMusicModel& model, std::span<const LabeledSample> train,
                               std::span<const LabeledSample> val, const TrainOptions& opt,
                               const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train.empty()) throw InvalidInputError("train_model: empty training set");
  if (opt.batch_size < 1) throw InvalidInputError("train_model: batch_size must be >= 1");
  nn::ParamStore& store = model.params();
  store.zero_grad();

  TrainReport report;
  std::vector<RealVector> best_values;
  auto snapshot = [&] {
    best_values.clear();
    for (const auto& e : store.entries()) best_values.push_back(e.value);
  };
  auto record = [&](EpochRecord rec) {
    const double selector = val.empty() ? rec.train_loss : rec.val_loss;
    if (selector < report.best_val_loss) {
      report.best_val_loss = selector;
      report.best_epoch = rec.epoch;
      snapshot();
    }
    report.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  };

  record({0, mean_rmspe(model, train), mean_rmspe(model, val)});

  Rng rng(opt.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Tape tape;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const LabeledSample& s = train[order[k]];
        tape.clear();
        const nn::Var loss = rmspe_loss(tape, model.forward(tape, s.x), s.theta);
        const double value = tape.scalar(loss);
        if (!std::isfinite(value)) {
          throw NumericalError("train_model: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(start / opt.batch_size) + ", sample " + std::to_string(order[k]) +
                               " (shuffle seed " + std::to_string(opt.seed) + ")");
        }
        tape.backward(loss, inv_batch);
        report.degenerate_eig_pairs += tape.diagnostics().degenerate_eig_pairs;
        batch_loss += value;
      }
      for (const auto& e : store.entries()) {
        for (double g : e.grad) {
          if (!std::isfinite(g)) {
            throw NumericalError("train_model: non-finite gradient in " + e.name + " at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(start / opt.batch_size) + " (shuffle seed " +
                                 std::to_string(opt.seed) + ")");
          }
        }
      }
      nn::adam_step(store, opt.adam, ++report.adam_steps);
      epoch_loss += batch_loss;
    }
    record({epoch, epoch_loss / static_cast<double>(train.size()), mean_rmspe(model, val)});
  }

  for (std::size_t i = 0; i < best_values.size(); ++i) store.entries()[i].value = best_values[i];
  return report;
}

}  // namespace damusic::experiment
