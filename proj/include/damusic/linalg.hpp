#pragma once

// Dense complex linear algebra for small arrays (m <= a few hundred):
// Hermitian eigendecomposition by cyclic Jacobi rotations, its reverse-mode
// adjoint, and the sample covariance of a snapshot block.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "damusic/errors.hpp"

namespace damusic {

using cplx = std::complex<double>;
using RealVector = std::vector<double>;
using ComplexVector = std::vector<cplx>;

/// Dense row-major complex matrix.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("ComplexMatrix: entry count " + std::to_string(data_.size()) + " != " +
                           std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
  }

  static ComplexMatrix diagonal(std::span<const double> diag) {
    ComplexMatrix out(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) out(i, i) = diag[i];
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<cplx> entries() noexcept { return data_; }
  std::span<const cplx> entries() const noexcept { return data_; }

  ComplexVector column(std::size_t c) const {
    ComplexVector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  /// Columns [first, first + count) as a new matrix.
  ComplexMatrix columns(std::size_t first, std::size_t count) const {
    ComplexMatrix out(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, first + c);
    return out;
  }

  ComplexMatrix adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
  }

  double frobenius_norm() const noexcept {
    double acc = 0.0;
    for (const auto& z : data_) acc += std::norm(z);
    return std::sqrt(acc);
  }

  double max_abs() const noexcept {
    double out = 0.0;
    for (const auto& z : data_) out = std::max(out, std::abs(z));
    return out;
  }

  ComplexMatrix& operator+=(const ComplexMatrix& rhs) {
    require_same_shape(rhs, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& rhs) {
    require_same_shape(rhs, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
  }
  ComplexMatrix& operator*=(cplx s) noexcept {
    for (auto& z : data_) z *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
  friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_) {
      throw DimensionError("matmul: " + std::to_string(a.rows_) + "x" + std::to_string(a.cols_) + " * " +
                           std::to_string(b.rows_) + "x" + std::to_string(b.cols_));
    }
    ComplexMatrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx{}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    }
    return out;
  }

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  void require_same_shape(const ComplexMatrix& rhs, const char* op) const {
    if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw DimensionError(std::string("ComplexMatrix ") + op + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

/// m x T block of array snapshots; column t is x(t).
using SnapshotMatrix = ComplexMatrix;

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("max_abs_diff: shape mismatch");
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a.entries()[i] - b.entries()[i]));
  return out;
}

/// (A + A^H) / 2
inline ComplexMatrix hermitian_part(const ComplexMatrix& a) {
  if (!a.is_square()) throw DimensionError("hermitian_part: matrix is not square");
  ComplexMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  return out;
}

/// Conjugated inner product a^H b.
inline cplx dot_h(std::span<const cplx> a, std::span<const cplx> b) {
  cplx acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

struct HermitianEVD {
  RealVector eigenvalues;     // ascending
  ComplexMatrix eigenvectors;  // column k pairs with eigenvalues[k]
  int sweeps = 0;
};

namespace detail {

inline void require_finite_square(const ComplexMatrix& a, const char* who) {
  if (!a.is_square()) {
    throw DimensionError(std::string(who) + ": expected a square matrix, got " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
  if (!a.all_finite()) throw InvalidInputError(std::string(who) + ": matrix has NaN or Inf entries");
}

inline double off_diagonal_norm(const ComplexMatrix& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) acc += std::norm(a(i, j));
  return std::sqrt(acc);
}

}  // namespace detail

inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kJacobiRelTol = 1e-12;

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// The input is symmetrized to (A + A^H)/2 first. Each rotation removes the
/// phase of a_pq with a diagonal unitary and then applies the real Jacobi
/// rotation that annihilates the now-real entry. Sweeps stop when the
/// off-diagonal Frobenius norm drops below 1e-12 * ||A||_F.
///
/// Eigenvalues come back ascending. Each eigenvector column is scaled so its
/// largest-magnitude component is real and positive.
inline HermitianEVD hermitian_evd(const ComplexMatrix& input) {
  detail::require_finite_square(input, "hermitian_evd");
  const std::size_t n = input.rows();
  ComplexMatrix w = hermitian_part(input);
  ComplexMatrix v = ComplexMatrix::identity(n);

  const double scale = w.frobenius_norm();
  int sweep = 0;
  if (scale > 0.0) {
    for (; sweep < kJacobiMaxSweeps; ++sweep) {
      if (detail::off_diagonal_norm(w) < kJacobiRelTol * scale) break;
      for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          const cplx b = w(p, q);
          const double abs_b = std::abs(b);
          if (abs_b == 0.0) continue;
          const cplx phase = b / abs_b;
          const double app = w(p, p).real();
          const double aqq = w(q, q).real();
          const double theta = (aqq - app) / (2.0 * abs_b);
          const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(1.0, theta));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;
          // J = diag(1, e^{-i phi}) applied to the (p, q) plane, followed by the real rotation.
          const cplx jpp = c;
          const cplx jpq = s;
          const cplx jqp = -s * std::conj(phase);
          const cplx jqq = c * std::conj(phase);

          for (std::size_t k = 0; k < n; ++k) {
            const cplx wkp = w(k, p);
            const cplx wkq = w(k, q);
            w(k, p) = wkp * jpp + wkq * jqp;
            w(k, q) = wkp * jpq + wkq * jqq;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const cplx wpk = w(p, k);
            const cplx wqk = w(q, k);
            w(p, k) = std::conj(jpp) * wpk + std::conj(jqp) * wqk;
            w(q, k) = std::conj(jpq) * wpk + std::conj(jqq) * wqk;
          }
          w(p, q) = 0.0;
          w(q, p) = 0.0;
          w(p, p) = w(p, p).real();
          w(q, q) = w(q, q).real();
          for (std::size_t k = 0; k < n; ++k) {
            const cplx vkp = v(k, p);
            const cplx vkq = v(k, q);
            v(k, p) = vkp * jpp + vkq * jqp;
            v(k, q) = vkp * jpq + vkq * jqq;
          }
        }
      }
    }
    if (sweep == kJacobiMaxSweeps && detail::off_diagonal_norm(w) >= kJacobiRelTol * scale) {
      throw NumericalError("hermitian_evd: Jacobi iteration did not converge in 100 sweeps");
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w(a, a).real() < w(b, b).real(); });

  HermitianEVD out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors = ComplexMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = w(src, src).real();
    std::size_t pivot = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double mag = std::abs(v(r, src));
      if (mag > best) {
        best = mag;
        pivot = r;
      }
    }
    const cplx unphase = best > 0.0 ? std::conj(v(pivot, src)) / best : cplx{1.0};
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, src) * unphase;
    out.eigenvectors(pivot, k) = out.eigenvectors(pivot, k).real();
  }
  return out;
}

struct EvdGradient {
  ComplexMatrix grad;               // dL/dA, Hermitian
  std::size_t degenerate_pairs = 0;  // eigenvalue pairs whose rotation term was dropped
};

/// Relative gap below which the rotation term of an eigenvalue pair is dropped.
inline double evd_gap_eps(std::span<const double> eigenvalues) {
  double top = 0.0;
  for (double l : eigenvalues) top = std::max(top, std::abs(l));
  return 1e-8 * std::max(1.0, top);
}

/// Reverse-mode adjoint of hermitian_evd.
///
/// Gradients use the convention G = dL/dRe + i dL/dIm. With
/// S = antiherm(E^H dE) and F_ij = 1/(lambda_j - lambda_i):
///
///   dA = E (diag(d lambda) + F o S) E^H
///
/// Pairs closer than evd_gap_eps get F_ij = 0 and are counted. Empty
/// cotangents are treated as zero. The downstream loss must be invariant to
/// the phase of each eigenvector for the result to be meaningful.
inline EvdGradient evd_backward(const ComplexMatrix& a, const HermitianEVD& evd, std::span<const double> grad_eigvals,
                                const ComplexMatrix& grad_eigvecs) {
  detail::require_finite_square(a, "evd_backward");
  const std::size_t n = a.rows();
  if (evd.eigenvalues.size() != n || evd.eigenvectors.rows() != n || evd.eigenvectors.cols() != n) {
    throw DimensionError("evd_backward: decomposition does not match input");
  }
  if (!grad_eigvals.empty() && grad_eigvals.size() != n) throw DimensionError("evd_backward: grad_eigvals length");
  if (!grad_eigvecs.empty() && (grad_eigvecs.rows() != n || grad_eigvecs.cols() != n)) {
    throw DimensionError("evd_backward: grad_eigvecs shape");
  }

  const ComplexMatrix& e = evd.eigenvectors;
  const auto& lambda = evd.eigenvalues;
  ComplexMatrix inner(n, n);
  EvdGradient out;

  if (!grad_eigvecs.empty()) {
    const ComplexMatrix ehg = e.adjoint() * grad_eigvecs;
    const double gap_eps = evd_gap_eps(lambda);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double gap = lambda[j] - lambda[i];
        if (std::abs(gap) < gap_eps) {
          if (i < j) ++out.degenerate_pairs;
          continue;
        }
        const cplx skew = 0.5 * (ehg(i, j) - std::conj(ehg(j, i)));
        inner(i, j) = skew / gap;
      }
    }
  }
  if (!grad_eigvals.empty()) {
    for (std::size_t i = 0; i < n; ++i) inner(i, i) += grad_eigvals[i];
  }

  out.grad = hermitian_part(e * inner * e.adjoint());
  return out;
}

/// K = (1/T) X X^H. Hermitian by construction (upper triangle mirrored).
inline ComplexMatrix sample_covariance(const SnapshotMatrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw InvalidInputError("sample_covariance: empty snapshot matrix");
  const std::size_t m = x.rows();
  const std::size_t t_count = x.cols();
  const double inv_t = 1.0 / static_cast<double>(t_count);
  ComplexMatrix k(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      cplx acc{};
      for (std::size_t t = 0; t < t_count; ++t) acc += x(i, t) * std::conj(x(j, t));
      acc *= inv_t;
      if (i == j) acc = acc.real();
      k(i, j) = acc;
      k(j, i) = std::conj(acc);
    }
  }
  return k;
}

/// P = B B^H for a basis B (m x n).
inline ComplexMatrix projector(const ComplexMatrix& basis) { return basis * basis.adjoint(); }

}  // namespace damusic
