#include "dsmopt/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dsmopt/errors.hpp"

namespace dsmopt::numlin {

namespace {

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": shape mismatch");
  }
}

void require_square(const CMatrix& a, const char* op) {
  if (!a.square() || a.empty()) throw DimensionMismatch(std::string(op) + ": matrix must be square");
}

// Column-major scratch used by the Jacobi iterations: column j occupies
// [j*n, (j+1)*n).
struct ColumnStore {
  std::size_t n = 0;
  std::vector<cplx> v;

  cplx* col(std::size_t j) { return v.data() + j * n; }
  const cplx* col(std::size_t j) const { return v.data() + j * n; }
};

ColumnStore to_columns(const CMatrix& a) {
  ColumnStore s{a.rows(), std::vector<cplx>(a.rows() * a.cols())};
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) s.v[c * s.n + r] = a(r, c);
  return s;
}

// One-sided (Hestenes) Jacobi: orthogonalizes the columns of `w`, applying
// the same rotations to `v` when given. Returns false on sweep-cap hit.
bool jacobi_orthogonalize(ColumnStore& w, ColumnStore* v) {
  const std::size_t n = w.n;
  const std::size_t ncols = w.v.size() / n;
  std::vector<double> norms(ncols);
  for (std::size_t j = 0; j < ncols; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += std::norm(w.col(j)[r]);
    norms[j] = s;
  }

  for (int sweep = 0; sweep < kSvdMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < ncols; ++p) {
      for (std::size_t q = p + 1; q < ncols; ++q) {
        cplx* wp = w.col(p);
        cplx* wq = w.col(q);
        cplx gamma{0.0, 0.0};
        for (std::size_t r = 0; r < n; ++r) gamma += std::conj(wp[r]) * wq[r];
        const double alpha = norms[p];
        const double beta = norms[q];
        const double abs_gamma = std::abs(gamma);
        if (abs_gamma == 0.0 || abs_gamma <= kSvdOrthoTol * std::sqrt(alpha * beta)) continue;
        rotated = true;

        const cplx phase_conj = std::conj(gamma / abs_gamma);
        const double zeta = (beta - alpha) / (2.0 * abs_gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        double np = 0.0;
        double nq = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const cplx a = wp[r];
          const cplx b = wq[r] * phase_conj;
          wp[r] = c * a - s * b;
          wq[r] = s * a + c * b;
          np += std::norm(wp[r]);
          nq += std::norm(wq[r]);
        }
        norms[p] = np;
        norms[q] = nq;

        if (v != nullptr) {
          cplx* vp = v->col(p);
          cplx* vq = v->col(q);
          for (std::size_t r = 0; r < v->n; ++r) {
            const cplx a = vp[r];
            const cplx b = vq[r] * phase_conj;
            vp[r] = c * a - s * b;
            vq[r] = s * a + c * b;
          }
        }
      }
    }
    if (!rotated) return true;
  }
  return false;
}

std::vector<std::size_t> descending_order(const std::vector<double>& d) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  return order;
}

// Fills column j of `u` (columns listed in `done` already orthonormal)
// with a unit vector orthogonal to them, starting from the standard basis
// vector with the smallest projection onto the existing span.
void complete_column(CMatrix& u, std::size_t j, const std::vector<std::size_t>& done) {
  const std::size_t n = u.rows();
  std::size_t best = 0;
  double best_proj = 2.0;
  for (std::size_t e = 0; e < n; ++e) {
    double proj = 0.0;
    for (std::size_t k : done) proj += std::norm(u(e, k));
    if (proj < best_proj) {
      best_proj = proj;
      best = e;
    }
  }
  std::vector<cplx> x(n, cplx{0.0, 0.0});
  x[best] = 1.0;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t k : done) {
      cplx dot{0.0, 0.0};
      for (std::size_t r = 0; r < n; ++r) dot += std::conj(u(r, k)) * x[r];
      for (std::size_t r = 0; r < n; ++r) x[r] -= dot * u(r, k);
    }
  }
  double nrm = 0.0;
  for (const cplx& z : x) nrm += std::norm(z);
  nrm = std::sqrt(nrm);
  for (std::size_t r = 0; r < n; ++r) u(r, j) = x[r] / nrm;
}

}  // namespace

// ---------------------------------------------------------------------------
// CMatrix

CMatrix::CMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, cplx{0.0, 0.0}) {
  if (rows == 0 || cols == 0) throw InvalidInput("CMatrix: rows and cols must be >= 1");
}

CMatrix::CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows == 0 || cols == 0) throw InvalidInput("CMatrix: rows and cols must be >= 1");
  if (entries_.size() != rows * cols) throw DimensionMismatch("CMatrix: entry count != rows*cols");
  if (!all_finite()) throw InvalidInput("CMatrix: non-finite entry");
}

CMatrix CMatrix::identity(std::size_t n) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMatrix CMatrix::diagonal(std::span<const double> d) {
  CMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

CMatrix CMatrix::diagonal(std::span<const cplx> d) {
  CMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

bool CMatrix::all_finite() const noexcept {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

CMatrix adjoint(const CMatrix& a) {
  CMatrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = std::conj(a(r, c));
  return t;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matrix product: inner dimensions differ");
  CMatrix p(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) p(i, j) += aik * b(k, j);
    }
  return p;
}

CMatrix operator+(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "operator+");
  CMatrix s = a;
  for (std::size_t k = 0; k < s.entries().size(); ++k) s.entries()[k] += b.entries()[k];
  return s;
}

CMatrix operator-(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "operator-");
  CMatrix s = a;
  for (std::size_t k = 0; k < s.entries().size(); ++k) s.entries()[k] -= b.entries()[k];
  return s;
}

CMatrix operator*(cplx s, const CMatrix& a) {
  CMatrix r = a;
  for (cplx& z : r.entries()) z *= s;
  return r;
}

double frobenius_norm(const CMatrix& a) {
  double s = 0.0;
  for (const cplx& z : a.entries()) s += std::norm(z);
  return std::sqrt(s);
}

double trace_real(const CMatrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i).real();
  return t;
}

std::vector<double> diagonal_real(const CMatrix& a) {
  std::vector<double> d(std::min(a.rows(), a.cols()));
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a(i, i).real();
  return d;
}

CMatrix scale_columns(const CMatrix& a, std::span<const double> s) {
  if (s.size() != a.cols()) throw DimensionMismatch("scale_columns: scale length");
  CMatrix r = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) *= s[j];
  return r;
}

CMatrix scale_rows(const CMatrix& a, std::span<const double> s) {
  if (s.size() != a.rows()) throw DimensionMismatch("scale_rows: scale length");
  CMatrix r = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) *= s[i];
  return r;
}

// ---------------------------------------------------------------------------
// HermitianPSD

namespace {

CMatrix mirror_lower(const CMatrix& a) {
  require_square(a, "HermitianPSD");
  CMatrix m = a;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    m(i, i) = cplx{m(i, i).real(), 0.0};
    for (std::size_t j = i + 1; j < m.cols(); ++j) m(i, j) = std::conj(m(j, i));
  }
  return m;
}

bool is_psd(const CMatrix& h) {
  const double scale = std::max(std::abs(trace_real(h)), frobenius_norm(h));
  if (scale == 0.0) return true;
  return positive_definite_shifted(h, Tolerances::psd * scale);
}

}  // namespace

HermitianPSD HermitianPSD::from_lower(const CMatrix& a) {
  CMatrix m = mirror_lower(a);
  if (!is_psd(m)) throw NotPSD("matrix has an eigenvalue below -tol_psd * trace");
  return HermitianPSD(std::move(m));
}

HermitianPSD HermitianPSD::from_lower_unchecked(const CMatrix& a) { return HermitianPSD(mirror_lower(a)); }

HermitianPSD hermitize(const CMatrix& a) {
  require_square(a, "hermitize");
  const CMatrix ah = adjoint(a);
  if (frobenius_norm(a - ah) > Tolerances::herm * frobenius_norm(a)) {
    throw NotHermitian("||A - A^H||_F exceeds tol_herm * ||A||_F");
  }
  CMatrix sym = 0.5 * (a + ah);
  return HermitianPSD::from_lower(sym);
}

// ---------------------------------------------------------------------------
// Factorizations

CMatrix cholesky(const HermitianPSD& a) { return cholesky(a.matrix()); }

CMatrix cholesky(const CMatrix& a) {
  require_square(a, "cholesky");
  const std::size_t n = a.rows();
  CMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j).real();
    for (std::size_t k = 0; k < j; ++k) pivot -= std::norm(l(j, k));
    if (!(pivot > Tolerances::pivot_floor)) {
      throw NotPositiveDefinite("pivot " + std::to_string(j) + " is " + std::to_string(pivot));
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
      l(i, j) = s / ljj;
    }
  }
  return l;
}

bool positive_definite_shifted(const CMatrix& a, double shift) {
  const std::size_t n = a.rows();
  std::vector<cplx> l(n * n, cplx{0.0, 0.0});
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j).real() + shift;
    for (std::size_t k = 0; k < j; ++k) pivot -= std::norm(l[j * n + k]);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
    const double ljj = std::sqrt(pivot);
    l[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * std::conj(l[j * n + k]);
      l[i * n + j] = s / ljj;
    }
  }
  return true;
}

double negative_eigenvalue_magnitude(const CMatrix& a) {
  require_square(a, "negative_eigenvalue_magnitude");
  const double fro = frobenius_norm(a);
  const double scale = std::max(std::abs(trace_real(a)), fro);
  if (scale == 0.0) return 0.0;
  double lo = Tolerances::psd * scale;
  if (positive_definite_shifted(a, lo)) return 0.0;
  double hi = 2.0 * fro + lo;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (positive_definite_shifted(a, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

CMatrix solve_lower(const CMatrix& l, const CMatrix& b) {
  require_square(l, "solve_lower");
  if (b.rows() != l.rows()) throw DimensionMismatch("solve_lower: row count");
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i)
    if (l(i, i) == cplx{0.0, 0.0}) throw SingularTriangular("zero diagonal entry " + std::to_string(i));
  CMatrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  }
  return x;
}

CMatrix solve_lower_adjoint(const CMatrix& l, const CMatrix& b) {
  require_square(l, "solve_lower_adjoint");
  if (b.rows() != l.rows()) throw DimensionMismatch("solve_lower_adjoint: row count");
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i)
    if (l(i, i) == cplx{0.0, 0.0}) throw SingularTriangular("zero diagonal entry " + std::to_string(i));
  CMatrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t ii = n; ii-- > 0;) {
      cplx s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= std::conj(l(k, ii)) * x(k, c);
      x(ii, c) = s / std::conj(l(ii, ii));
    }
  }
  return x;
}

SvdFactors svd(const CMatrix& a) {
  require_square(a, "svd");
  if (!a.all_finite()) throw InvalidInput("svd: non-finite input");
  const std::size_t n = a.rows();
  ColumnStore w = to_columns(a);
  ColumnStore v = to_columns(CMatrix::identity(n));
  if (!jacobi_orthogonalize(w, &v)) throw NoConvergence("svd: Jacobi sweep cap reached");

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += std::norm(w.col(j)[r]);
    norms[j] = std::sqrt(s);
  }
  const auto order = descending_order(norms);

  SvdFactors f{CMatrix(n, n), std::vector<double>(n), CMatrix(n, n)};
  std::vector<std::size_t> filled;
  std::vector<std::size_t> zero_cols;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    f.d[k] = norms[j];
    for (std::size_t r = 0; r < n; ++r) f.V(r, k) = v.col(j)[r];
    if (norms[j] > 0.0 && std::isnormal(norms[j])) {
      for (std::size_t r = 0; r < n; ++r) f.U(r, k) = w.col(j)[r] / norms[j];
      filled.push_back(k);
    } else {
      f.d[k] = 0.0;
      zero_cols.push_back(k);
    }
  }
  for (std::size_t k : zero_cols) {
    complete_column(f.U, k, filled);
    filled.push_back(k);
  }

  // Phase convention: largest-magnitude entry of each V column real positive.
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double m = std::abs(f.V(r, k));
      if (m > best) {
        best = m;
        arg = r;
      }
    }
    const cplx rot = std::conj(f.V(arg, k)) / best;
    for (std::size_t r = 0; r < n; ++r) {
      f.V(r, k) *= rot;
      f.U(r, k) *= rot;
    }
    f.V(arg, k) = cplx{f.V(arg, k).real(), 0.0};
  }
  return f;
}

std::vector<double> singular_values(const CMatrix& a) {
  require_square(a, "singular_values");
  if (!a.all_finite()) throw InvalidInput("singular_values: non-finite input");
  const std::size_t n = a.rows();
  ColumnStore w = to_columns(a);
  if (!jacobi_orthogonalize(w, nullptr)) throw NoConvergence("svd: Jacobi sweep cap reached");
  std::vector<double> d(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += std::norm(w.col(j)[r]);
    d[j] = std::sqrt(s);
  }
  std::vector<double> sorted(n);
  const auto order = descending_order(d);
  for (std::size_t k = 0; k < n; ++k) sorted[k] = d[order[k]];
  return sorted;
}

RightSingular right_singular(const CMatrix& a) {
  require_square(a, "right_singular");
  const std::size_t n = a.rows();
  ColumnStore w = to_columns(a);
  ColumnStore v = to_columns(CMatrix::identity(n));
  if (!jacobi_orthogonalize(w, &v)) throw NoConvergence("svd: Jacobi sweep cap reached");
  RightSingular out{std::vector<double>(n), CMatrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      s += std::norm(w.col(j)[r]);
      out.V(r, j) = v.col(j)[r];
    }
    out.d[j] = std::sqrt(s);
  }
  return out;
}

CMatrix inverse(const CMatrix& a, double rel_pivot) {
  require_square(a, "inverse");
  const std::size_t n = a.rows();
  double amax = 0.0;
  for (const cplx& z : a.entries()) amax = std::max(amax, std::abs(z));
  if (amax == 0.0) throw SingularMatrix("zero matrix");

  CMatrix lu = a;
  CMatrix inv = CMatrix::identity(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu(k, k));
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(lu(r, k)) > best) {
        best = std::abs(lu(r, k));
        piv = r;
      }
    }
    if (!(best > rel_pivot * amax)) throw SingularMatrix("pivot below threshold at column " + std::to_string(k));
    if (piv != k) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(lu(k, c), lu(piv, c));
        std::swap(inv(k, c), inv(piv, c));
      }
    }
    const cplx d = lu(k, k);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == k) continue;
      const cplx f = lu(r, k) / d;
      if (f == cplx{0.0, 0.0}) continue;
      for (std::size_t c = 0; c < n; ++c) {
        lu(r, c) -= f * lu(k, c);
        inv(r, c) -= f * inv(k, c);
      }
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const cplx d = lu(r, r);
    for (std::size_t c = 0; c < n; ++c) inv(r, c) /= d;
  }
  return inv;
}

}  // namespace dsmopt::numlin
