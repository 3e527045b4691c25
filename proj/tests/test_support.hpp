#pragma once

// Independent oracles shared by the test suites. Nothing here calls into the
// code paths it is used to check.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "damusic/linalg.hpp"
#include "damusic/rng.hpp"

namespace damusic::testing {

inline ComplexMatrix random_hermitian(std::size_t n, Rng& rng, double scale = 1.0) {
  ComplexMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = scale * rng.normal();
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto [re, im] = rng.normal_pair();
      a(i, j) = scale * cplx(re, im);
      a(j, i) = std::conj(a(i, j));
    }
  }
  return a;
}

inline ComplexMatrix random_complex(std::size_t rows, std::size_t cols, Rng& rng) {
  ComplexMatrix a(rows, cols);
  for (auto& z : a.entries()) z = rng.complex_normal();
  return a;
}

/// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double step = 1e-6) {
  const double x0 = x[i];
  x[i] = x0 + step;
  const double up = f(x);
  x[i] = x0 - step;
  const double down = f(x);
  return (up - down) / (2.0 * step);
}

/// |a - b| / max(|a|, |b|), or the absolute error when both are tiny.
inline double relative_error(double a, double b, double floor = 1e-8) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > floor ? std::abs(a - b) / scale : std::abs(a - b);
}

/// Gram-Schmidt QR of a random complex matrix: a Haar-ish unitary.
inline ComplexMatrix random_unitary(std::size_t n, Rng& rng) {
  ComplexMatrix q = random_complex(n, n, rng);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      cplx proj{};
      for (std::size_t i = 0; i < n; ++i) proj += std::conj(q(i, k)) * q(i, j);
      for (std::size_t i = 0; i < n; ++i) q(i, j) -= proj * q(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += std::norm(q(i, j));
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
  }
  return q;
}

/// Singular values of A (ascending) from the eigenvalues of A^H A.
inline std::vector<double> singular_values(const ComplexMatrix& a) {
  std::vector<double> out;
  for (double l : hermitian_evd(a.adjoint() * a).eigenvalues) out.push_back(std::sqrt(std::max(0.0, l)));
  return out;
}

}  // namespace damusic::testing
