#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "damusic/linalg.hpp"
#include "test_support.hpp"

namespace damusic {
namespace {

using testing::central_difference;
using testing::random_hermitian;
using testing::relative_error;

double unitarity_error(const ComplexMatrix& e) {
  return max_abs_diff(e.adjoint() * e, ComplexMatrix::identity(e.rows()));
}

ComplexMatrix reconstruct(const HermitianEVD& evd) {
  return evd.eigenvectors * ComplexMatrix::diagonal(evd.eigenvalues) * evd.eigenvectors.adjoint();
}

TEST(HermitianEvd, IdentityHasUnitEigenvalues) {
  const auto evd = hermitian_evd(ComplexMatrix::identity(3));
  for (double l : evd.eigenvalues) EXPECT_DOUBLE_EQ(l, 1.0);
  EXPECT_LT(unitarity_error(evd.eigenvectors), 1e-12);
}

TEST(HermitianEvd, DiagonalIsSortedWithPermutedBasis) {
  const std::vector<double> diag{3.0, 1.0, 2.0};
  const auto evd = hermitian_evd(ComplexMatrix::diagonal(diag));
  EXPECT_EQ(evd.eigenvalues, (RealVector{1.0, 2.0, 3.0}));
  // eigenvalue 1 lives on e_1, 2 on e_2, 3 on e_0
  const std::size_t expected_row[] = {1, 2, 0};
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t r = 0; r < 3; ++r) {
      EXPECT_EQ(evd.eigenvectors(r, k), cplx(r == expected_row[k] ? 1.0 : 0.0)) << "k=" << k << " r=" << r;
    }
  }
}

TEST(HermitianEvd, RandomMatricesSatisfyInvariants) {
  Rng rng(11);
  for (std::size_t n : {1u, 2u, 3u, 4u, 8u, 16u}) {
    for (int rep = 0; rep < 20; ++rep) {
      const ComplexMatrix a = random_hermitian(n, rng);
      const auto evd = hermitian_evd(a);
      ASSERT_EQ(evd.eigenvalues.size(), n);
      for (std::size_t i = 0; i + 1 < n; ++i) EXPECT_LE(evd.eigenvalues[i], evd.eigenvalues[i + 1]);
      EXPECT_LT(unitarity_error(evd.eigenvectors), 1e-10);
      EXPECT_LT(max_abs_diff(reconstruct(evd), a), 1e-9);
    }
  }
}

TEST(HermitianEvd, PhaseConventionLargestComponentRealPositive) {
  Rng rng(5);
  const auto evd = hermitian_evd(random_hermitian(6, rng));
  for (std::size_t k = 0; k < 6; ++k) {
    std::size_t pivot = 0;
    for (std::size_t r = 1; r < 6; ++r)
      if (std::abs(evd.eigenvectors(r, k)) > std::abs(evd.eigenvectors(pivot, k))) pivot = r;
    EXPECT_GT(evd.eigenvectors(pivot, k).real(), 0.0);
    EXPECT_EQ(evd.eigenvectors(pivot, k).imag(), 0.0);
  }
}

TEST(HermitianEvd, SymmetrizesInput) {
  Rng rng(8);
  ComplexMatrix a = testing::random_complex(5, 5, rng);
  const auto direct = hermitian_evd(a);
  const auto sym = hermitian_evd(hermitian_part(a));
  EXPECT_EQ(direct.eigenvalues, sym.eigenvalues);
  EXPECT_EQ(direct.eigenvectors, sym.eigenvectors);
}

TEST(HermitianEvd, RejectsBadInput) {
  EXPECT_THROW(hermitian_evd(ComplexMatrix(2, 3)), DimensionError);
  ComplexMatrix a = ComplexMatrix::identity(3);
  a(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(hermitian_evd(a), InvalidInputError);
  a(1, 2) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(hermitian_evd(a), InvalidInputError);
}

TEST(HermitianEvd, ZeroMatrix) {
  const auto evd = hermitian_evd(ComplexMatrix(4, 4));
  for (double l : evd.eigenvalues) EXPECT_EQ(l, 0.0);
  EXPECT_LT(unitarity_error(evd.eigenvectors), 1e-15);
}

TEST(HermitianEvd, NoiseProjectorIsPhaseInvariant) {
  Rng rng(21);
  const auto evd = hermitian_evd(random_hermitian(8, rng));
  const ComplexMatrix noise = evd.eigenvectors.columns(0, 5);
  ComplexMatrix rotated = noise;
  for (std::size_t k = 0; k < rotated.cols(); ++k) {
    const cplx phase = std::polar(1.0, 0.7 * static_cast<double>(k) + 0.3);
    for (std::size_t r = 0; r < rotated.rows(); ++r) rotated(r, k) *= phase;
  }
  EXPECT_LT(max_abs_diff(projector(noise), projector(rotated)), 1e-14);
}

// ---------------------------------------------------------------------------
// evd_backward
// ---------------------------------------------------------------------------

/// The 64 (for n = 8) independent real coordinates of a Hermitian matrix:
/// diagonal reals, then (Re, Im) of each strict upper-triangular entry.
std::vector<double> hermitian_coords(const ComplexMatrix& a) {
  std::vector<double> x;
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i) x.push_back(a(i, i).real());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      x.push_back(a(i, j).real());
      x.push_back(a(i, j).imag());
    }
  return x;
}

ComplexMatrix hermitian_from_coords(const std::vector<double>& x, std::size_t n) {
  ComplexMatrix a(n, n);
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) a(i, i) = x[p++];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      a(i, j) = cplx(x[p], x[p + 1]);
      a(j, i) = std::conj(a(i, j));
      p += 2;
    }
  return a;
}

/// dL/dA (Hermitian, G = dL/dRe + i dL/dIm) mapped to the coordinate gradient.
std::vector<double> coord_gradient(const ComplexMatrix& g) {
  std::vector<double> out;
  const std::size_t n = g.rows();
  for (std::size_t i = 0; i < n; ++i) out.push_back(g(i, i).real());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      out.push_back(2.0 * g(i, j).real());
      out.push_back(2.0 * g(i, j).imag());
    }
  return out;
}

/// Phase-invariant test loss: sum_k c_k lambda_k + sum_{ik} W_ik |E_ik|^2.
struct EigenLoss {
  std::vector<double> c;
  std::vector<double> w;  // row-major n x n

  double operator()(const HermitianEVD& evd) const {
    const std::size_t n = evd.eigenvalues.size();
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += c[k] * evd.eigenvalues[k];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) acc += w[i * n + k] * std::norm(evd.eigenvectors(i, k));
    return acc;
  }

  ComplexMatrix grad_vectors(const HermitianEVD& evd) const {
    const std::size_t n = evd.eigenvalues.size();
    ComplexMatrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) g(i, k) = 2.0 * w[i * n + k] * evd.eigenvectors(i, k);
    return g;
  }
};

void check_evd_gradient(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const ComplexMatrix a = random_hermitian(n, rng);
  EigenLoss loss;
  for (std::size_t k = 0; k < n; ++k) loss.c.push_back(rng.normal());
  for (std::size_t k = 0; k < n * n; ++k) loss.w.push_back(rng.normal());

  const auto evd = hermitian_evd(a);
  const auto g = evd_backward(a, evd, loss.c, loss.grad_vectors(evd));
  EXPECT_EQ(g.degenerate_pairs, 0u);
  EXPECT_LT(max_abs_diff(g.grad, g.grad.adjoint()), 1e-14);
  const auto analytic = coord_gradient(g.grad);

  const auto f = [&](const std::vector<double>& x) { return loss(hermitian_evd(hermitian_from_coords(x, n))); };
  const auto x0 = hermitian_coords(a);
  ASSERT_EQ(x0.size(), n * n);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double numeric = central_difference(f, x0, i, 1e-6);
    if (std::max(std::abs(numeric), std::abs(analytic[i])) > 1e-8) {
      EXPECT_LT(relative_error(analytic[i], numeric), 1e-5) << "coord " << i << " analytic " << analytic[i] << " fd " << numeric;
    }
  }
}

TEST(EvdBackward, ZeroCotangentGivesZero) {
  Rng rng(2);
  const ComplexMatrix a = random_hermitian(5, rng);
  const auto evd = hermitian_evd(a);
  const auto g = evd_backward(a, evd, RealVector(5, 0.0), ComplexMatrix(5, 5));
  EXPECT_EQ(g.grad.max_abs(), 0.0);
  EXPECT_EQ(evd_backward(a, evd, {}, ComplexMatrix()).grad.max_abs(), 0.0);
}

TEST(EvdBackward, TopEigenvalueGradientIsOuterProduct) {
  Rng rng(3);
  const ComplexMatrix a = random_hermitian(6, rng);
  const auto evd = hermitian_evd(a);
  RealVector gl(6, 0.0);
  gl[5] = 1.0;
  const auto g = evd_backward(a, evd, gl, ComplexMatrix());
  const ComplexMatrix v = evd.eigenvectors.columns(5, 1);
  EXPECT_LT(max_abs_diff(g.grad, v * v.adjoint()), 1e-14);

  // and the identity itself, by finite differences on lambda_max
  const auto f = [](const std::vector<double>& x) { return hermitian_evd(hermitian_from_coords(x, 6)).eigenvalues[5]; };
  const auto analytic = coord_gradient(g.grad);
  const auto x0 = hermitian_coords(a);
  for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_NEAR(central_difference(f, x0, i), analytic[i], 1e-7);
}

TEST(EvdBackward, MatchesFiniteDifferences4x4) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) check_evd_gradient(4, 100 + seed);
}

TEST(EvdBackward, MatchesFiniteDifferences8x8) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) check_evd_gradient(8, 200 + seed);
}

TEST(EvdBackward, DegenerateGapsAreDroppedAndCounted) {
  const std::vector<double> diag{1.0, 1.0, 2.0};
  const ComplexMatrix a = ComplexMatrix::diagonal(diag);
  const auto evd = hermitian_evd(a);
  ComplexMatrix gv(3, 3);
  for (auto& z : gv.entries()) z = cplx(0.5, -0.25);
  const auto g = evd_backward(a, evd, {}, gv);
  EXPECT_EQ(g.degenerate_pairs, 1u);
  EXPECT_TRUE(g.grad.all_finite());
}

TEST(EvdBackward, ShapeChecks) {
  const ComplexMatrix a = ComplexMatrix::identity(3);
  const auto evd = hermitian_evd(a);
  EXPECT_THROW(evd_backward(a, evd, RealVector(2, 0.0), ComplexMatrix()), DimensionError);
  EXPECT_THROW(evd_backward(a, evd, {}, ComplexMatrix(3, 2)), DimensionError);
  EXPECT_THROW(evd_backward(ComplexMatrix::identity(4), evd, {}, ComplexMatrix()), DimensionError);
}

// ---------------------------------------------------------------------------
// sample_covariance
// ---------------------------------------------------------------------------

TEST(SampleCovariance, SingleBasisSnapshot) {
  ComplexMatrix x(3, 1);
  x(0, 0) = 1.0;
  ComplexMatrix expected(3, 3);
  expected(0, 0) = 1.0;
  EXPECT_EQ(sample_covariance(x), expected);
}

TEST(SampleCovariance, ZeroSnapshotsGiveZero) { EXPECT_EQ(sample_covariance(ComplexMatrix(4, 7)).max_abs(), 0.0); }

TEST(SampleCovariance, EmptyIsRejected) {
  EXPECT_THROW(sample_covariance(ComplexMatrix(4, 0)), InvalidInputError);
  EXPECT_THROW(sample_covariance(ComplexMatrix()), InvalidInputError);
}

TEST(SampleCovariance, LawOfLargeNumbers) {
  Rng rng(99);
  const ComplexMatrix x = testing::random_complex(4, 100000, rng);
  EXPECT_LT(max_abs_diff(sample_covariance(x), ComplexMatrix::identity(4)), 0.05);
}

TEST(SampleCovariance, HermitianPsdAndTrace) {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 2 + rng.below(7);
    const std::size_t t = 1 + rng.below(20);
    const ComplexMatrix x = testing::random_complex(m, t, rng);
    const ComplexMatrix k = sample_covariance(x);
    EXPECT_EQ(max_abs_diff(k, k.adjoint()), 0.0);
    EXPECT_GE(hermitian_evd(k).eigenvalues.front(), -1e-10);
    double trace = 0.0;
    for (std::size_t i = 0; i < m; ++i) trace += k(i, i).real();
    double energy = 0.0;
    for (const auto& z : x.entries()) energy += std::norm(z);
    EXPECT_NEAR(trace, energy / static_cast<double>(t), 1e-12 * std::max(1.0, trace));
  }
}

}  // namespace
}  // namespace damusic
