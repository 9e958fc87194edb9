#pragma once

// Dense complex linear algebra for the small (N <= ~16) per-tone matrices of
// a vectored DSL binder: Hermitian Cholesky, triangular solves, one-sided
// Jacobi SVD and a handful of elementwise helpers.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dsmopt::numlin {

using cplx = std::complex<double>;

struct Tolerances {
  static constexpr double chol = 1e-10;
  static constexpr double svd = 1e-10;
  static constexpr double unitary = 1e-10;
  static constexpr double herm = 1e-8;
  static constexpr double psd = 1e-10;
  static constexpr double pivot_floor = 1e-300;
};

inline constexpr int kSvdMaxSweeps = 60;
inline constexpr double kSvdOrthoTol = 1e-14;

// Dense row-major complex matrix. A default-constructed matrix is empty
// (0x0); every other instance has rows, cols >= 1.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols);
  CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

  static CMatrix identity(std::size_t n);
  static CMatrix diagonal(std::span<const double> d);
  static CMatrix diagonal(std::span<const cplx> d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return entries_.empty(); }
  bool square() const noexcept { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

  std::span<cplx> entries() noexcept { return entries_; }
  std::span<const cplx> entries() const noexcept { return entries_; }

  bool all_finite() const noexcept;

  friend bool operator==(const CMatrix&, const CMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> entries_;
};

CMatrix adjoint(const CMatrix& a);
CMatrix operator*(const CMatrix& a, const CMatrix& b);
CMatrix operator+(const CMatrix& a, const CMatrix& b);
CMatrix operator-(const CMatrix& a, const CMatrix& b);
CMatrix operator*(cplx s, const CMatrix& a);
double frobenius_norm(const CMatrix& a);
double trace_real(const CMatrix& a);
std::vector<double> diagonal_real(const CMatrix& a);

// Scales column j by s[j] (A * diag(s)).
CMatrix scale_columns(const CMatrix& a, std::span<const double> s);
// Scales row i by s[i] (diag(s) * A).
CMatrix scale_rows(const CMatrix& a, std::span<const double> s);

// Hermitian positive semi-definite matrix. The lower triangle is the
// authoritative data; the upper triangle is kept as its mirror.
class HermitianPSD {
 public:
  HermitianPSD() = default;

  // Mirrors the lower triangle of `a` and checks positive semi-definiteness
  // (smallest eigenvalue >= -Tolerances::psd * trace). Throws NotPSD.
  static HermitianPSD from_lower(const CMatrix& a);

  // Skips the PSD check. For matrices that are PSD by construction
  // (outer products, congruences of PSD matrices).
  static HermitianPSD from_lower_unchecked(const CMatrix& a);

  std::size_t dim() const noexcept { return m_.rows(); }
  const CMatrix& matrix() const noexcept { return m_; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return m_(r, c); }

  friend bool operator==(const HermitianPSD&, const HermitianPSD&) = default;

 private:
  explicit HermitianPSD(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

struct SvdFactors {
  CMatrix U;
  std::vector<double> d;
  CMatrix V;
};

// L with L L^H = A, L lower triangular with a positive real diagonal.
// Throws NotPositiveDefinite when a pivot is <= Tolerances::pivot_floor.
CMatrix cholesky(const HermitianPSD& a);
CMatrix cholesky(const CMatrix& a);  // reads the lower triangle only

// X with L X = B (forward substitution). Throws SingularTriangular.
CMatrix solve_lower(const CMatrix& l, const CMatrix& b);
// X with L^H X = B (back substitution on the adjoint).
CMatrix solve_lower_adjoint(const CMatrix& l, const CMatrix& b);

// Square complex SVD A = U diag(d) V^H by one-sided Jacobi rotations.
// d is non-increasing; each column of V has its largest-magnitude entry
// real and positive. Throws NoConvergence after kSvdMaxSweeps sweeps.
SvdFactors svd(const CMatrix& a);

// Singular values only (same rotations, no V accumulation).
std::vector<double> singular_values(const CMatrix& a);

// Right singular pairs in Jacobi output order (unsorted, no phase fix):
// d[j] = ||A v_j||. The hot-loop variant used by the tone kernels.
struct RightSingular {
  std::vector<double> d;
  CMatrix V;
};
RightSingular right_singular(const CMatrix& a);

// (A + A^H)/2 after checking ||A - A^H||_F <= tol_herm ||A||_F, then the
// PSD check. Throws NotHermitian or NotPSD.
HermitianPSD hermitize(const CMatrix& a);

// True when A + shift*I admits a Cholesky factorization with strictly
// positive pivots (reads the lower triangle).
bool positive_definite_shifted(const CMatrix& a, double shift);

// Largest t >= 0 such that A + t I is not positive definite, i.e. the
// magnitude of the most negative eigenvalue (0 when A is PSD up to
// Tolerances::psd * trace). Bisection on the Cholesky test.
double negative_eigenvalue_magnitude(const CMatrix& a);

// Inverse of a square matrix by LU with partial pivoting. Throws
// SingularMatrix when a pivot falls below rel_pivot * max|A|.
CMatrix inverse(const CMatrix& a, double rel_pivot = 1e-13);

}  // namespace dsmopt::numlin
