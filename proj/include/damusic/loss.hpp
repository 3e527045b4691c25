#pragma once

// Root-mean-square periodic error over the best source-to-estimate assignment:
//
//   RMSPE(theta, theta_hat) = min_P sqrt( (1/d) || mod_pi(theta - P theta_hat) ||^2 )

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "damusic/errors.hpp"
#include "damusic/linalg.hpp"
#include "damusic/nn/tape.hpp"

namespace damusic {

inline constexpr std::size_t kMaxRmspeOrder = 8;

/// Maps e to e - pi * round(e / pi) in [-pi/2, pi/2); +-pi/2 both map to -pi/2.
inline double wrap_mod_pi(double e) {
  constexpr double pi = std::numbers::pi;
  double r = e - pi * std::floor(e / pi + 0.5);
  if (r >= pi / 2) r -= pi;
  if (r < -pi / 2) r += pi;
  return r;
}

inline RealVector wrap_mod_pi(std::span<const double> e) {
  RealVector out(e.size());
  std::transform(e.begin(), e.end(), out.begin(), [](double v) { return wrap_mod_pi(v); });
  return out;
}

struct RmspeResult {
  double value = 0.0;
  /// theta[i] is matched with theta_hat[best_perm[i]].
  std::vector<std::size_t> best_perm;
};

/// Exhaustive search over all d! assignments; ties keep the lexicographically
/// smallest permutation.
inline RmspeResult rmspe(std::span<const double> theta, std::span<const double> theta_hat) {
  const std::size_t d = theta.size();
  if (theta_hat.size() != d) throw DimensionError("rmspe: theta and theta_hat differ in length");
  if (d < 1) throw InvalidInputError("rmspe: empty angle vectors");
  if (d > kMaxRmspeOrder) throw UnsupportedOrderError("rmspe: exhaustive permutation search supports d <= 8");

  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  RmspeResult best{std::numeric_limits<double>::infinity(), perm};
  double best_sq = std::numeric_limits<double>::infinity();
  do {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = wrap_mod_pi(theta[i] - theta_hat[perm[i]]);
      sq += e * e;
    }
    if (sq < best_sq) {
      best_sq = sq;
      best.best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.value = std::sqrt(best_sq / static_cast<double>(d));
  return best;
}

/// d RMSPE / d theta_hat with the minimizing permutation held fixed. Returns
/// zeros when the loss is exactly zero.
inline RealVector rmspe_grad(std::span<const double> theta, std::span<const double> theta_hat, const RmspeResult& res) {
  const std::size_t d = theta.size();
  RealVector grad(d, 0.0);
  if (res.value == 0.0) return grad;
  const double k = 1.0 / (static_cast<double>(d) * res.value);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t j = res.best_perm[i];
    grad[j] = -k * wrap_mod_pi(theta[i] - theta_hat[j]);
  }
  return grad;
}

inline RealVector rmspe_grad(std::span<const double> theta, std::span<const double> theta_hat) {
  return rmspe_grad(theta, theta_hat, rmspe(theta, theta_hat));
}

/// RMSPE of a taped estimate against constant targets.
inline nn::Var rmspe_loss(nn::Tape& tape, nn::Var theta_hat, RealVector theta) {
  const RealVector& est = tape.value(theta_hat);
  const RmspeResult res = rmspe(theta, est);
  RealVector grad = rmspe_grad(theta, est, res);
  nn::Var y{tape.size()};
  return tape.push({res.value}, [theta_hat, y, grad = std::move(grad)](nn::Tape& t) {
    const double g = t.grad(y)[0];
    auto& gh = t.grad(theta_hat);
    for (std::size_t i = 0; i < grad.size(); ++i) gh[i] += g * grad[i];
  });
}

}  // namespace damusic
