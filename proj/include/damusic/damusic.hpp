#pragma once

// Deep-augmented MUSIC:
//
//   X -> [Re; Im] per snapshot -> GRU over t = 1..T -> dense head -> K~ (Hermitian)
//     -> EVD -> noise subspace -> pseudo spectrum on the grid (max-normalized)
//     -> 3-layer MLP -> (pi/2) tanh -> d DoA estimates
//
// Everything after the GRU input is on the tape, including the
// eigendecomposition, so the whole chain trains end to end on RMSPE.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "damusic/classical.hpp"
#include "damusic/errors.hpp"
#include "damusic/linalg.hpp"
#include "damusic/loss.hpp"
#include "damusic/nn/layers.hpp"
#include "damusic/nn/param_store.hpp"
#include "damusic/nn/tape.hpp"
#include "damusic/rng.hpp"
#include "damusic/signal.hpp"

namespace damusic {

struct DaMusicConfig {
  std::size_t m = 8;
  std::size_t d = 2;
  std::size_t grid_size = kDefaultGridSize;
  std::size_t gru_hidden = 16;
  std::size_t mlp_hidden = 16;
  double spectrum_eps = 1e-8;

  /// Defaults tied to the array size: 2m hidden units everywhere.
  static DaMusicConfig for_array(std::size_t m, std::size_t d) {
    DaMusicConfig cfg;
    cfg.m = m;
    cfg.d = d;
    cfg.gru_hidden = 2 * m;
    cfg.mlp_hidden = 2 * m;
    return cfg;
  }

  void validate() const {
    if (m < 2) throw ConfigError("model.m", "need at least 2 array elements");
    if (d < 1 || d >= m) throw ConfigError("model.d", "need 1 <= d < m");
    if (grid_size < 2 * m) throw ConfigError("model.grid_size", "must be >= 2m");
    if (gru_hidden < 1) throw ConfigError("model.gru_hidden", "must be >= 1");
    if (mlp_hidden < 1) throw ConfigError("model.mlp_hidden", "must be >= 1");
    if (!(spectrum_eps > 0.0) || !std::isfinite(spectrum_eps)) throw ConfigError("model.spectrum_eps", "must be > 0");
  }

  /// Closed-form trainable parameter count.
  std::size_t parameter_count() const {
    const std::size_t in = 2 * m;
    const std::size_t h = gru_hidden;
    const std::size_t gru = 3 * ((in + h) * h + h);
    const std::size_t head = h * 2 * m * m + 2 * m * m;
    const std::size_t mlp = (grid_size * mlp_hidden + mlp_hidden) + (mlp_hidden * mlp_hidden + mlp_hidden) +
                            (mlp_hidden * d + d);
    return gru + head + mlp;
  }

  friend bool operator==(const DaMusicConfig&, const DaMusicConfig&) = default;
};

/// Snapshot t becomes [Re x(t); Im x(t)].
inline std::vector<RealVector> stack_real_imag(const SnapshotMatrix& x) {
  const std::size_t m = x.rows();
  std::vector<RealVector> out(x.cols(), RealVector(2 * m));
  for (std::size_t t = 0; t < x.cols(); ++t) {
    for (std::size_t k = 0; k < m; ++k) {
      out[t][k] = x(k, t).real();
      out[t][m + k] = x(k, t).imag();
    }
  }
  return out;
}

inline SnapshotMatrix unstack_real_imag(const std::vector<RealVector>& seq) {
  if (seq.empty()) return {};
  const std::size_t m = seq.front().size() / 2;
  SnapshotMatrix x(m, seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].size() != 2 * m) throw DimensionError("unstack_real_imag: ragged sequence");
    for (std::size_t k = 0; k < m; ++k) x(k, t) = {seq[t][k], seq[t][m + k]};
  }
  return x;
}

/// [Re K (row-major); Im K (row-major)] <-> ComplexMatrix.
inline ComplexMatrix complex_from_stacked(std::span<const double> v, std::size_t m) {
  if (v.size() != 2 * m * m) throw DimensionError("complex_from_stacked: expected 2m^2 reals");
  ComplexMatrix k(m, m);
  for (std::size_t i = 0; i < m * m; ++i) k.entries()[i] = {v[i], v[m * m + i]};
  return k;
}

inline RealVector stacked_from_complex(const ComplexMatrix& k) {
  const std::size_t n = k.size();
  RealVector v(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = k.entries()[i].real();
    v[n + i] = k.entries()[i].imag();
  }
  return v;
}

/// (K0 + K0^H) / 2 on the stacked real representation.
inline nn::Var hermitianize(nn::Tape& tape, nn::Var k0, std::size_t m) {
  const ComplexMatrix k = hermitian_part(complex_from_stacked(tape.value(k0), m));
  nn::Var y{tape.size()};
  return tape.push(stacked_from_complex(k), [k0, y, m](nn::Tape& t) {
    const ComplexMatrix g = hermitian_part(complex_from_stacked(t.grad(y), m));
    const RealVector gs = stacked_from_complex(g);
    auto& gk = t.grad(k0);
    for (std::size_t i = 0; i < gs.size(); ++i) gk[i] += gs[i];
  });
}

/// Values of the learned spectrum plus the intermediates its adjoint needs.
struct SpectrumForward {
  ComplexMatrix k;
  HermitianEVD evd;
  std::vector<cplx> projections;  // c[g * n + k] = e_k^H a(psi_g), k < n = m - d
  RealVector raw;                 // 1 / (||E_n^H a||^2 + eps)
  RealVector normalized;          // raw / max(raw)
  std::size_t argmax = 0;
};

inline SpectrumForward learned_spectrum_forward(const ComplexMatrix& k_tilde, std::size_t d, const GridSteering& grid,
                                                double eps) {
  const std::size_t m = k_tilde.rows();
  if (d < 1 || d >= m) throw InvalidInputError("learned_spectrum: need 1 <= d < m");
  if (grid.m() != m) throw DimensionError("learned_spectrum: grid built for a different array size");
  SpectrumForward f;
  f.k = k_tilde;
  f.evd = hermitian_evd(k_tilde);
  const std::size_t n = m - d;
  const std::size_t g_count = grid.size();
  const ComplexMatrix& a = grid.vectors();
  const ComplexMatrix& e = f.evd.eigenvectors;
  f.projections.assign(g_count * n, cplx{});
  f.raw.assign(g_count, 0.0);
  for (std::size_t g = 0; g < g_count; ++g) {
    double energy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      cplx c{};
      for (std::size_t i = 0; i < m; ++i) c += std::conj(e(i, k)) * a(i, g);
      f.projections[g * n + k] = c;
      energy += std::norm(c);
    }
    f.raw[g] = 1.0 / (energy + eps);
  }
  f.argmax = static_cast<std::size_t>(std::max_element(f.raw.begin(), f.raw.end()) - f.raw.begin());
  const double peak = f.raw[f.argmax];
  f.normalized.resize(g_count);
  for (std::size_t g = 0; g < g_count; ++g) f.normalized[g] = f.raw[g] / peak;
  return f;
}

/// Adjoint of learned_spectrum_forward: d(normalized spectrum) cotangent -> dL/dK~
/// (Hermitian, same convention as evd_backward). The max is treated as a
/// fixed index.
inline EvdGradient learned_spectrum_backward(const SpectrumForward& f, std::span<const double> grad_normalized,
                                             std::size_t d, const GridSteering& grid) {
  const std::size_t m = f.k.rows();
  const std::size_t n = m - d;
  const std::size_t g_count = grid.size();
  const double peak = f.raw[f.argmax];

  RealVector grad_raw(g_count);
  double dot = 0.0;
  for (std::size_t g = 0; g < g_count; ++g) {
    grad_raw[g] = grad_normalized[g] / peak;
    dot += grad_normalized[g] * f.raw[g];
  }
  grad_raw[f.argmax] -= dot / (peak * peak);

  // raw = 1/energy  =>  d raw / d energy = -raw^2 ; d energy / d conj(e_k) -> 2 a conj(c)
  ComplexMatrix grad_vecs(m, m);
  const ComplexMatrix& a = grid.vectors();
  for (std::size_t g = 0; g < g_count; ++g) {
    const double ge = -grad_raw[g] * f.raw[g] * f.raw[g];
    if (ge == 0.0) continue;
    for (std::size_t k = 0; k < n; ++k) {
      const cplx w = 2.0 * ge * std::conj(f.projections[g * n + k]);
      for (std::size_t i = 0; i < m; ++i) grad_vecs(i, k) += a(i, g) * w;
    }
  }
  return evd_backward(f.k, f.evd, {}, grad_vecs);
}

/// Max-normalized pseudo spectrum of the learned covariance, on the tape.
inline nn::Var learned_spectrum(nn::Tape& tape, nn::Var k_tilde, std::size_t m, std::size_t d,
                                std::shared_ptr<const GridSteering> grid, double eps) {
  auto fwd = std::make_shared<SpectrumForward>(
      learned_spectrum_forward(complex_from_stacked(tape.value(k_tilde), m), d, *grid, eps));
  RealVector out = fwd->normalized;
  nn::Var y{tape.size()};
  return tape.push(std::move(out), [k_tilde, y, d, fwd, grid](nn::Tape& t) {
    const EvdGradient g = learned_spectrum_backward(*fwd, t.grad(y), d, *grid);
    t.diagnostics().degenerate_eig_pairs += g.degenerate_pairs;
    const RealVector gs = stacked_from_complex(g.grad);
    auto& gk = t.grad(k_tilde);
    for (std::size_t i = 0; i < gs.size(); ++i) gk[i] += gs[i];
  });
}

/// Intermediate nodes of one forward pass, exposed for tests and diagnostics.
struct DaMusicTrace {
  nn::Var hidden;
  nn::Var k_tilde;
  nn::Var spectrum;
  nn::Var theta_hat;
};

class DaMusicModel {
 public:
  /// Glorot weights, zero biases; parameter creation order is fixed
  /// (gru, head, mlp.1, mlp.2, mlp.3) so a seed fully determines the model.
  DaMusicModel(const DaMusicConfig& cfg, Rng& rng)
      : cfg_(cfg), grid_(std::make_shared<GridSteering>(cfg.m, cfg.grid_size)) {
    cfg_.validate();
    const std::size_t in = 2 * cfg_.m;
    gru_ = nn::GruCell::create(store_, "gru", in, cfg_.gru_hidden, rng);
    head_ = nn::DenseLayer::create(store_, "head", cfg_.gru_hidden, 2 * cfg_.m * cfg_.m, nn::Activation::identity, rng);
    mlp1_ = nn::DenseLayer::create(store_, "mlp.1", cfg_.grid_size, cfg_.mlp_hidden, nn::Activation::relu, rng);
    mlp2_ = nn::DenseLayer::create(store_, "mlp.2", cfg_.mlp_hidden, cfg_.mlp_hidden, nn::Activation::relu, rng);
    mlp3_ = nn::DenseLayer::create(store_, "mlp.3", cfg_.mlp_hidden, cfg_.d, nn::Activation::identity, rng);
  }

  const DaMusicConfig& config() const noexcept { return cfg_; }
  nn::ParamStore& params() noexcept { return store_; }
  const nn::ParamStore& params() const noexcept { return store_; }
  const GridSteering& grid() const noexcept { return *grid_; }
  std::size_t parameter_count() const noexcept { return store_.scalar_count(); }

  /// GRU over all snapshots starting from h0 = 0; returns the final state.
  nn::Var encode(nn::Tape& tape, const SnapshotMatrix& x) {
    if (x.rows() != cfg_.m) throw DimensionError("DaMusicModel: snapshot matrix has wrong number of rows");
    if (x.cols() == 0) throw InvalidInputError("DaMusicModel: no snapshots");
    nn::Var h = tape.constant(RealVector(cfg_.gru_hidden, 0.0));
    for (auto& xt : stack_real_imag(x)) h = gru_.step(tape, store_, h, tape.constant(std::move(xt)));
    return h;
  }

  /// Dense map 2m -> 2m^2 followed by Hermitianization.
  nn::Var pseudo_covariance(nn::Tape& tape, nn::Var hidden) {
    return hermitianize(tape, head_.forward(tape, store_, hidden), cfg_.m);
  }

  nn::Var spectrum(nn::Tape& tape, nn::Var k_tilde) {
    return learned_spectrum(tape, k_tilde, cfg_.m, cfg_.d, grid_, cfg_.spectrum_eps);
  }

  /// grid -> relu -> relu -> d, then (pi/2) tanh.
  nn::Var mlp(nn::Tape& tape, nn::Var spectrum) {
    nn::Var h = mlp1_.forward(tape, store_, spectrum);
    h = mlp2_.forward(tape, store_, h);
    h = mlp3_.forward(tape, store_, h);
    return nn::scale(tape, nn::tanh(tape, h), kHalfPi);
  }

  DaMusicTrace trace(nn::Tape& tape, const SnapshotMatrix& x) {
    DaMusicTrace tr;
    tr.hidden = encode(tape, x);
    tr.k_tilde = pseudo_covariance(tape, tr.hidden);
    tr.spectrum = spectrum(tape, tr.k_tilde);
    tr.theta_hat = mlp(tape, tr.spectrum);
    return tr;
  }

  nn::Var forward(nn::Tape& tape, const SnapshotMatrix& x) { return trace(tape, x).theta_hat; }

  /// Inference: estimates, ascending.
  RealVector predict(const SnapshotMatrix& x) {
    nn::Tape tape;
    RealVector out = tape.value(forward(tape, x));
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  DaMusicConfig cfg_;
  std::shared_ptr<const GridSteering> grid_;
  nn::ParamStore store_;
  nn::GruCell gru_;
  nn::DenseLayer head_;
  nn::DenseLayer mlp1_;
  nn::DenseLayer mlp2_;
  nn::DenseLayer mlp3_;
};

}  // namespace damusic
