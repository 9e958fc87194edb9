#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dsmopt/errors.hpp"
#include "dsmopt/numlin.hpp"
#include "dsmopt/rng.hpp"
#include "oracles/oracles.hpp"
#include "support/fixtures.hpp"

using namespace dsmopt;
using namespace dsmopt::numlin;
using fixtures::diag;
using fixtures::real_matrix;

namespace {

double residual(const CMatrix& a, const CMatrix& b) { return frobenius_norm(a - b); }

bool lower_triangular(const CMatrix& l) {
  for (std::size_t r = 0; r < l.rows(); ++r)
    for (std::size_t c = r + 1; c < l.cols(); ++c)
      if (l(r, c) != cplx{}) return false;
  return true;
}

CMatrix random_pd(SeededStream& st, std::size_t n) {
  const CMatrix g = fixtures::random_matrix(st, n, n);
  return g * adjoint(g) + fixtures::scaled_identity(n, 0.1);
}

}  // namespace

TEST_CASE("cholesky of diagonal and identity") {
  const CMatrix l = cholesky(diag({4.0, 1.0}));
  CHECK(l == diag({2.0, 1.0}));
  CHECK(cholesky(CMatrix::identity(3)) == CMatrix::identity(3));
}

TEST_CASE("cholesky of a complex Hermitian matrix reconstructs it") {
  CMatrix a(2, 2, {{2.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}, {2.0, 0.0}});
  const CMatrix l = cholesky(HermitianPSD::from_lower(a));
  CHECK(l(0, 0).real() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(residual(l * adjoint(l), a) <= 1e-14);
  CHECK(lower_triangular(l));
}

TEST_CASE("cholesky rejects a singular matrix") {
  CHECK_THROWS_AS(cholesky(diag({1.0, 0.0})), NotPositiveDefinite);
  CHECK_THROWS_AS(cholesky(diag({1.0, -2.0})), NotPositiveDefinite);
}

TEST_CASE("cholesky property: triangular, positive real diagonal, small residual") {
  SeededStream st(derive_seed(7, {1}));
  for (std::size_t n : {1u, 2u, 5u, 8u, 16u})
    for (int k = 0; k < 20; ++k) {
      const CMatrix a = random_pd(st, n);
      const CMatrix l = cholesky(a);
      CHECK(lower_triangular(l));
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(l(i, i).imag() == 0.0);
        CHECK(l(i, i).real() > 0.0);
      }
      CHECK(residual(l * adjoint(l), a) <= Tolerances::chol * frobenius_norm(a));
    }
}

TEST_CASE("whitening identity L^-1 R L^-H = I") {
  SeededStream st(derive_seed(7, {2}));
  for (std::size_t n : {2u, 4u, 8u}) {
    const CMatrix r = random_pd(st, n);
    const CMatrix l = cholesky(r);
    const CMatrix w = solve_lower(l, adjoint(solve_lower(l, r)));
    CHECK(residual(w, CMatrix::identity(n)) <= Tolerances::chol);
  }
}

TEST_CASE("solve_lower examples") {
  SeededStream st(derive_seed(7, {3}));
  const CMatrix b = fixtures::random_matrix(st, 3, 2);
  CHECK(solve_lower(CMatrix::identity(3), b) == b);
  CHECK(residual(solve_lower(diag({2.0, 1.0}), CMatrix::identity(2)), diag({0.5, 1.0})) == 0.0);

  CMatrix l = fixtures::random_matrix(st, 4, 4);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = r + 1; c < 4; ++c) l(r, c) = {};
    l(r, r) += cplx{2.0, 0.0};
  }
  const CMatrix rhs = fixtures::random_matrix(st, 4, 4);
  const CMatrix x = solve_lower(l, rhs);
  CHECK(residual(l * x, rhs) <= Tolerances::chol * frobenius_norm(rhs));
  const CMatrix y = solve_lower_adjoint(l, rhs);
  CHECK(residual(adjoint(l) * y, rhs) <= Tolerances::chol * frobenius_norm(rhs));

  CHECK_THROWS_AS(solve_lower(diag({1.0, 0.0}), CMatrix::identity(2)), SingularTriangular);
}

TEST_CASE("svd examples") {
  const auto p = svd(real_matrix(2, 2, {0.0, 1.0, 1.0, 0.0}));
  CHECK(p.d[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.d[1] == doctest::Approx(1.0).epsilon(1e-15));

  const auto r = svd(real_matrix(2, 2, {1.0, 1.0, 0.0, 0.0}));
  CHECK(r.d[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r.d[1] <= 1e-15);
}

TEST_CASE("svd matches Gram-eigenvalue oracle on random 8x8") {
  SeededStream st(derive_seed(7, {4}));
  for (int k = 0; k < 10; ++k) {
    const CMatrix a = fixtures::random_matrix(st, 8, 8);
    const auto f = svd(a);
    const auto o = oracle::singular_values(oracle::to_eigen(a));
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(f.d[j] - o[j]) <= 1e-10 * o[0]);
  }
}

TEST_CASE("svd property: unitary factors, sorted values, reconstruction, phase convention") {
  SeededStream st(derive_seed(7, {5}));
  for (std::size_t n : {1u, 2u, 3u, 8u, 16u})
    for (int k = 0; k < 10; ++k) {
      CMatrix a = fixtures::random_matrix(st, n, n);
      if (k % 3 == 0 && n > 1) {
        // rank-deficient input: duplicate a column
        for (std::size_t r = 0; r < n; ++r) a(r, n - 1) = a(r, 0);
      }
      const auto f = svd(a);
      const CMatrix id = CMatrix::identity(n);
      CHECK(residual(adjoint(f.U) * f.U, id) <= Tolerances::unitary);
      CHECK(residual(adjoint(f.V) * f.V, id) <= Tolerances::unitary);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(f.d[j] >= 0.0);
        if (j > 0) CHECK(f.d[j] <= f.d[j - 1]);
      }
      const CMatrix rebuilt = scale_columns(f.U, f.d) * adjoint(f.V);
      CHECK(residual(rebuilt, a) <= Tolerances::svd * frobenius_norm(a));
      for (std::size_t c = 0; c < n; ++c) {
        // some entry of maximal magnitude (ties up to rounding) is real positive
        double top = 0.0;
        for (std::size_t r = 0; r < n; ++r) top = std::max(top, std::abs(f.V(r, c)));
        bool found = false;
        for (std::size_t r = 0; r < n; ++r)
          if (std::abs(f.V(r, c)) >= top * (1.0 - 1e-12) && f.V(r, c).real() > 0.0 &&
              std::abs(f.V(r, c).imag()) <= 1e-12)
            found = true;
        CHECK(found);
      }
    }
}

TEST_CASE("svd scales with |c|") {
  SeededStream st(derive_seed(7, {6}));
  for (int k = 0; k < 20; ++k) {
    const CMatrix a = fixtures::random_matrix(st, 4, 4);
    const cplx c = st.complex_normal(4.0);
    const auto d0 = singular_values(a);
    const auto d1 = singular_values(c * a);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(d1[j] - std::abs(c) * d0[j]) <= 1e-12 * std::abs(c) * d0[0]);
  }
}

TEST_CASE("svd is deterministic") {
  SeededStream st(derive_seed(7, {7}));
  const CMatrix a = fixtures::random_matrix(st, 6, 6);
  const auto f = svd(a);
  const auto g = svd(a);
  CHECK(f.U == g.U);
  CHECK(f.V == g.V);
  CHECK(f.d == g.d);
}

TEST_CASE("hermitize examples") {
  const HermitianPSD id = hermitize(CMatrix::identity(2));
  CHECK(id.matrix() == CMatrix::identity(2));

  CMatrix a = CMatrix::identity(2);
  a(0, 1) = {0.0, 1e-14};
  const HermitianPSD h = hermitize(a);
  CHECK(h(0, 1) == cplx{0.0, 5e-15});
  CHECK(h(1, 0) == cplx{0.0, -5e-15});

  CHECK_THROWS_AS(hermitize(diag({1.0, -1.0})), NotPSD);
  CHECK_THROWS_AS(hermitize(real_matrix(2, 2, {1.0, 1.0, 0.0, 1.0})), NotHermitian);
}

TEST_CASE("HermitianPSD mirrors the lower triangle") {
  CMatrix a(2, 2, {{2.0, 0.0}, {9.0, 9.0}, {0.5, 0.25}, {1.0, 0.0}});
  const auto h = HermitianPSD::from_lower(a);
  CHECK(h(0, 1) == std::conj(h(1, 0)));
  CHECK(h(1, 0) == cplx{0.5, 0.25});
}

TEST_CASE("inverse and negative eigenvalue magnitude") {
  SeededStream st(derive_seed(7, {8}));
  const CMatrix a = random_pd(st, 5);
  CHECK(residual(a * inverse(a), CMatrix::identity(5)) <= 1e-10);
  CHECK_THROWS_AS(inverse(real_matrix(2, 2, {1.0, 2.0, 2.0, 4.0})), SingularMatrix);
  CHECK(negative_eigenvalue_magnitude(diag({1.0, 2.0})) == 0.0);
  CHECK(negative_eigenvalue_magnitude(diag({1.0, -0.5})) == doctest::Approx(0.5).epsilon(1e-9));
}
