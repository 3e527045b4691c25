#pragma once

#include <cmath>

#include "damusic/nn/param_store.hpp"

namespace damusic::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update at step t (1-based). Gradients are zeroed
/// afterwards.
inline void adam_step(ParamStore& store, const AdamConfig& cfg, std::size_t t) {
  if (t < 1) throw InvalidInputError("adam_step: step count starts at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& e : store.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      e.moment1[i] = cfg.beta1 * e.moment1[i] + (1.0 - cfg.beta1) * g;
      e.moment2[i] = cfg.beta2 * e.moment2[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = e.moment1[i] / c1;
      const double v_hat = e.moment2[i] / c2;
      e.value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
  store.zero_grad();
}

}  // namespace damusic::nn
