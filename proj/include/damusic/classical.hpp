#pragma once

// Model-based DoA baselines: MUSIC, the conventional (Bartlett) beamformer,
// and uniform random guessing.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "damusic/errors.hpp"
#include "damusic/linalg.hpp"
#include "damusic/rng.hpp"
#include "damusic/signal.hpp"

namespace damusic {

/// Denominator guard in the MUSIC pseudo spectrum.
inline constexpr double kMusicSpectrumEps = 1e-12;

struct SpectrumGrid {
  RealVector angles;
  RealVector values;
};

/// Steering vectors of a search grid, precomputed once per (m, grid).
class GridSteering {
 public:
  GridSteering(std::size_t m, RealVector angles) : angles_(std::move(angles)), m_(m) {
    if (angles_.empty()) throw InvalidInputError("GridSteering: empty grid");
    vectors_ = steering_matrix(angles_, m);
  }
  explicit GridSteering(std::size_t m, std::size_t grid_size = kDefaultGridSize) : GridSteering(m, doa_grid(grid_size)) {}

  std::size_t m() const noexcept { return m_; }
  std::size_t size() const noexcept { return angles_.size(); }
  const RealVector& angles() const noexcept { return angles_; }
  /// m x G, column g is a(psi_g).
  const ComplexMatrix& vectors() const noexcept { return vectors_; }

 private:
  RealVector angles_;
  std::size_t m_;
  ComplexMatrix vectors_;
};

/// ||B^H a||^2 for every grid column a.
inline RealVector subspace_energy(const ComplexMatrix& basis, const GridSteering& grid) {
  if (basis.rows() != grid.m()) throw DimensionError("subspace_energy: basis rows != array size");
  const ComplexMatrix& a = grid.vectors();
  RealVector out(grid.size(), 0.0);
  for (std::size_t k = 0; k < basis.cols(); ++k) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      cplx c{};
      for (std::size_t i = 0; i < grid.m(); ++i) c += std::conj(basis(i, k)) * a(i, g);
      out[g] += std::norm(c);
    }
  }
  return out;
}

/// p(psi) = 1 / (a^H E_n E_n^H a + eps)
inline SpectrumGrid music_spectrum(const ComplexMatrix& noise_basis, const GridSteering& grid,
                                   double eps = kMusicSpectrumEps) {
  SpectrumGrid out{grid.angles(), subspace_energy(noise_basis, grid)};
  for (auto& v : out.values) v = 1.0 / (v + eps);
  return out;
}

inline SpectrumGrid music_spectrum(const ComplexMatrix& noise_basis, const RealVector& grid_angles,
                                   double eps = kMusicSpectrumEps) {
  if (grid_angles.empty()) throw InvalidInputError("music_spectrum: empty grid");
  return music_spectrum(noise_basis, GridSteering(noise_basis.rows(), grid_angles), eps);
}

/// Conventional beamformer p(psi) = a^H K a / m^2.
inline SpectrumGrid bartlett_spectrum(const ComplexMatrix& covariance, const GridSteering& grid) {
  const std::size_t m = grid.m();
  if (covariance.rows() != m || covariance.cols() != m) throw DimensionError("bartlett_spectrum: covariance shape");
  const ComplexMatrix& a = grid.vectors();
  SpectrumGrid out{grid.angles(), RealVector(grid.size())};
  const double norm = 1.0 / static_cast<double>(m * m);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    cplx acc{};
    for (std::size_t i = 0; i < m; ++i) {
      cplx row{};
      for (std::size_t j = 0; j < m; ++j) row += covariance(i, j) * a(j, g);
      acc += std::conj(a(i, g)) * row;
    }
    out.values[g] = std::max(0.0, acc.real()) * norm;
  }
  return out;
}

struct PeakPick {
  RealVector angles;      // ascending
  bool shortage = false;  // fewer than d strict local maxima; remainder filled by largest values
};

/// The d largest strict local maxima of the spectrum. Endpoints are compared
/// against their single neighbour. Ties go to the lower index.
inline PeakPick find_peaks(const SpectrumGrid& spec, std::size_t d) {
  const std::size_t g_count = spec.values.size();
  if (d < 1 || d > g_count) throw InvalidInputError("find_peaks: need 1 <= d <= grid size");
  const auto& v = spec.values;

  std::vector<std::size_t> maxima;
  for (std::size_t g = 0; g < g_count; ++g) {
    const bool left = g == 0 || v[g] > v[g - 1];
    const bool right = g + 1 == g_count || v[g] > v[g + 1];
    if (left && right) maxima.push_back(g);
  }
  auto by_value = [&](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); };
  std::stable_sort(maxima.begin(), maxima.end(), by_value);

  PeakPick out;
  std::vector<std::size_t> chosen(maxima.begin(), maxima.begin() + static_cast<std::ptrdiff_t>(std::min(d, maxima.size())));
  if (chosen.size() < d) {
    out.shortage = true;
    std::vector<char> taken(g_count, 0);
    for (auto g : chosen) taken[g] = 1;
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < g_count; ++g)
      if (!taken[g]) rest.push_back(g);
    std::stable_sort(rest.begin(), rest.end(), by_value);
    for (std::size_t i = 0; chosen.size() < d; ++i) chosen.push_back(rest[i]);
  }
  for (auto g : chosen) out.angles.push_back(spec.angles[g]);
  std::sort(out.angles.begin(), out.angles.end());
  return out;
}

/// sample covariance -> EVD -> eigenvectors of the m-d smallest eigenvalues ->
/// pseudo spectrum -> peak picking.
inline PeakPick music_estimate(const SnapshotMatrix& x, std::size_t d, const GridSteering& grid) {
  const std::size_t m = x.rows();
  if (d < 1 || d >= m) throw InvalidInputError("music_estimate: need 1 <= d < m");
  if (grid.m() != m) throw DimensionError("music_estimate: grid built for a different array size");
  const HermitianEVD evd = hermitian_evd(sample_covariance(x));
  const ComplexMatrix noise = evd.eigenvectors.columns(0, m - d);
  return find_peaks(music_spectrum(noise, grid), d);
}

inline PeakPick bartlett_estimate(const SnapshotMatrix& x, std::size_t d, const GridSteering& grid) {
  const std::size_t m = x.rows();
  if (d < 1 || d >= m) throw InvalidInputError("bartlett_estimate: need 1 <= d < m");
  if (grid.m() != m) throw DimensionError("bartlett_estimate: grid built for a different array size");
  return find_peaks(bartlett_spectrum(sample_covariance(x), grid), d);
}

/// d i.i.d. uniform angles on (-pi/2, pi/2), ascending.
inline RealVector random_estimate(std::size_t d, Rng& rng) {
  if (d < 1) throw InvalidInputError("random_estimate: d must be >= 1");
  RealVector out(d);
  for (auto& t : out) t = rng.uniform(-kHalfPi, kHalfPi);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace damusic
