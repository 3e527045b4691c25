#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "damusic/classical.hpp"
#include "damusic/loss.hpp"
#include "test_support.hpp"

namespace damusic {
namespace {

SpectrumGrid make_spectrum(RealVector values) {
  SpectrumGrid s;
  s.values = std::move(values);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.angles.push_back(static_cast<double>(i));
  return s;
}

TEST(FindPeaks, PicksLargestLocalMaxima) {
  const auto p = find_peaks(make_spectrum({0, 1, 0, 2, 0, 0.5, 0}), 2);
  EXPECT_FALSE(p.shortage);
  EXPECT_EQ(p.angles, (RealVector{1, 3}));
}

TEST(FindPeaks, EndpointsCompareAgainstOneNeighbour) {
  const auto p = find_peaks(make_spectrum({3, 1, 2}), 2);
  EXPECT_FALSE(p.shortage);
  EXPECT_EQ(p.angles, (RealVector{0, 2}));
}

TEST(FindPeaks, ShortageFallsBackToLargestValues) {
  const auto p = find_peaks(make_spectrum({1, 2, 3, 4}), 2);
  EXPECT_TRUE(p.shortage);
  EXPECT_EQ(p.angles, (RealVector{2, 3}));

  // a plateau is not a strict maximum
  const auto q = find_peaks(make_spectrum({1, 2, 2, 1}), 1);
  EXPECT_TRUE(q.shortage);
  EXPECT_EQ(q.angles, (RealVector{1}));
}

TEST(FindPeaks, RejectsBadOrder) {
  EXPECT_THROW(find_peaks(make_spectrum({1, 2}), 3), InvalidInputError);
  EXPECT_THROW(find_peaks(make_spectrum({1, 2}), 0), InvalidInputError);
}

// Noise subspace of the exact covariance A A^H + s I, built without going
// through sample data.
ComplexMatrix exact_noise_basis(const RealVector& thetas, std::size_t m) {
  const ComplexMatrix a = steering_matrix(thetas, m);
  const ComplexMatrix r = a * a.adjoint() + ComplexMatrix::identity(m) * cplx(0.1);
  return hermitian_evd(r).eigenvectors.columns(0, m - thetas.size());
}

TEST(Music, ExactCovarianceRecoversOnGridAngles) {
  const GridSteering grid(8);
  const RealVector& g = grid.angles();
  const std::vector<RealVector> cases = {
      {g[200]},
      {g[120], g[250]},
      {g[30], g[100], g[170], g[240], g[320]},
  };
  for (const auto& thetas : cases) {
    const auto spec = music_spectrum(exact_noise_basis(thetas, 8), grid);
    const auto pick = find_peaks(spec, thetas.size());
    EXPECT_EQ(pick.angles, thetas);
    for (double t : thetas) EXPECT_GT(spec.values[nearest_grid_index(t, grid.size())], 1e9);
  }
}

TEST(Music, AngleVectorOverload) {
  const RealVector thetas{-0.5, 0.25};
  const auto spec = music_spectrum(exact_noise_basis(thetas, 6), RealVector{-0.5, 0.0, 0.25});
  EXPECT_GT(spec.values[0], 1e9);
  EXPECT_LT(spec.values[1], 1e3);
  EXPECT_GT(spec.values[2], 1e9);
  EXPECT_THROW(music_spectrum(exact_noise_basis(thetas, 6), RealVector{}), InvalidInputError);
}

TEST(Music, SpectrumMatchesDirectFormula) {
  Rng rng(11);
  const auto basis = exact_noise_basis({-0.3, 0.7}, 5);
  const GridSteering grid(5, 17);
  const auto spec = music_spectrum(basis, grid);
  const ComplexMatrix proj = basis * basis.adjoint();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto a = steering_vector(grid.angles()[k], 5);
    cplx q{};
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) q += std::conj(a[i]) * proj(i, j) * a[j];
    EXPECT_NEAR(spec.values[k], 1.0 / (q.real() + kMusicSpectrumEps), 1e-9 * spec.values[k]);
  }
}

TEST(Music, NoisySamplesAreAccurate) {
  Scenario scn;
  scn.m = 8;
  scn.d = 2;
  scn.T = 200;
  scn.snr_db = 10.0;
  const GridSteering grid(8);
  std::vector<double> errs;
  for (std::uint64_t i = 0; i < 200; ++i) {
    Rng rng = Rng::derive(2024, i);
    const auto s = generate_sample(scn, rng);
    errs.push_back(rmspe(s.theta, music_estimate(s.x, 2, grid).angles).value);
  }
  std::sort(errs.begin(), errs.end());
  EXPECT_LT(errs[100], 0.02);
}

TEST(Music, RejectsBadShapes) {
  Rng rng(1);
  const auto x = testing::random_complex(4, 10, rng);
  EXPECT_THROW(music_estimate(x, 4, GridSteering(4)), InvalidInputError);
  EXPECT_THROW(music_estimate(x, 1, GridSteering(5)), DimensionError);
}

TEST(Bartlett, UnitResponseAtSource) {
  const GridSteering grid(8);
  const double theta = grid.angles()[77];
  const auto a = steering_matrix(RealVector{theta}, 8);
  const auto spec = bartlett_spectrum(a * a.adjoint(), grid);
  EXPECT_NEAR(spec.values[77], 1.0, 1e-12);
  for (double v : spec.values) EXPECT_LE(v, 1.0 + 1e-12);
  EXPECT_EQ(find_peaks(spec, 1).angles, (RealVector{theta}));
}

TEST(Bartlett, WhiteNoiseIsFlat) {
  const GridSteering grid(6, 40);
  const auto spec = bartlett_spectrum(ComplexMatrix::identity(6), grid);
  for (double v : spec.values) EXPECT_NEAR(v, 1.0 / 6.0, 1e-12);
}

TEST(RandomEstimate, SortedInRangeWithUniformError) {
  // For d = 1 the wrapped difference of two uniforms on an interval of length
  // pi is uniform, so the mean absolute error is pi / 4.
  Rng rng(5);
  Rng truth(6);
  double acc = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto e = random_estimate(3, rng);
    EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
    for (double t : e) EXPECT_TRUE(t > -kHalfPi && t < kHalfPi);
    const RealVector one{e[1]};
    const RealVector theta{truth.uniform(-kHalfPi, kHalfPi)};
    acc += rmspe(theta, one).value;
  }
  EXPECT_NEAR(acc / n, std::numbers::pi / 4, 0.02);
}

}  // namespace
}  // namespace damusic
