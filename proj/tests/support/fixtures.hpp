#pragma once

// Small hand-built scenarios and seeded random tones shared by the unit
// tests and the acceptance suite.

#include <cmath>
#include <complex>
#include <initializer_list>
#include <vector>

#include "dsmopt/binder.hpp"
#include "dsmopt/numlin.hpp"
#include "dsmopt/rng.hpp"

namespace dsmopt::fixtures {

using binder::Scenario;
using binder::ToneChannel;
using numlin::CMatrix;
using numlin::cplx;
using numlin::HermitianPSD;

inline CMatrix real_matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> v) {
  std::vector<cplx> e;
  for (double x : v) e.emplace_back(x, 0.0);
  return CMatrix(rows, cols, std::move(e));
}

inline CMatrix diag(std::initializer_list<double> v) {
  std::vector<double> d(v);
  return CMatrix::diagonal(std::span<const double>(d));
}

inline CMatrix scaled_identity(std::size_t n, double s) {
  CMatrix m = CMatrix::identity(n);
  for (cplx& z : m.entries()) z *= s;
  return m;
}

inline ToneChannel tone(std::size_t index, CMatrix h, CMatrix r) {
  return {index, 1e5 * static_cast<double>(index + 1), std::move(h), HermitianPSD::from_lower(r)};
}

// Scenario over the given tones. Budgets in W, gap linear.
inline Scenario scenario(std::vector<ToneChannel> tones, std::vector<double> budgets_w,
                         binder::ConstraintMode mode = binder::ConstraintMode::per_modem, double gamma = 1.0) {
  Scenario s;
  s.n_lines = budgets_w.size();
  s.gamma_db = 10.0 * std::log10(gamma);
  s.mode = mode;
  for (double p : budgets_w) s.p_tot_dbm.push_back(binder::w_to_dbm(p));
  s.bands = binder::BandPlan::vdsl2_downstream();
  s.tones = std::move(tones);
  s.finalize();
  return s;
}

// Per-tone masks in W ([line][tone]).
inline void set_masks(Scenario& s, std::vector<std::vector<double>> masks) {
  s.mask.mode = binder::MaskSpec::Mode::w_per_tone;
  s.mask.per_tone_w = std::move(masks);
  s.finalize();
}

// N=1 scenario with one scalar channel gain h^2 per tone, unit noise.
inline Scenario scalar_scenario(const std::vector<double>& h2, double budget_w,
                                binder::ConstraintMode mode = binder::ConstraintMode::total) {
  std::vector<ToneChannel> tones;
  for (std::size_t i = 0; i < h2.size(); ++i) tones.push_back(tone(i, real_matrix(1, 1, {std::sqrt(h2[i])}), diag({1.0})));
  return scenario(std::move(tones), {budget_w}, mode);
}

inline CMatrix random_matrix(SeededStream& st, std::size_t rows, std::size_t cols, double var = 1.0) {
  CMatrix m(rows, cols);
  for (cplx& z : m.entries()) z = st.complex_normal(var);
  return m;
}

// sigma2 I + G G^H (rank `rank` coloured part).
inline CMatrix random_noise(SeededStream& st, std::size_t n, std::size_t rank, double sigma2, double scale) {
  CMatrix r = scaled_identity(n, sigma2);
  if (rank > 0) {
    const CMatrix g = random_matrix(st, n, rank, scale);
    r = r + g * numlin::adjoint(g);
  }
  return r;
}

// A random tone: diagonally dominant coupled H, correlated noise.
inline ToneChannel random_tone(SeededStream& st, std::size_t n, std::size_t index = 0) {
  CMatrix h = random_matrix(st, n, n, 0.05);
  for (std::size_t k = 0; k < n; ++k) h(k, k) += cplx{1.0 + st.uniform(), 0.0};
  const CMatrix r = random_noise(st, n, std::min<std::size_t>(n, 2), 0.01 + 0.05 * st.uniform(), 0.02);
  return tone(index, std::move(h), r);
}

inline std::vector<double> random_prices(SeededStream& st, std::size_t n) {
  std::vector<double> lam(n);
  for (double& l : lam) l = std::exp(-2.0 + 4.0 * st.uniform());
  return lam;
}

// Circulant H with a symmetric first row and white noise on every tone.
inline Scenario circulant_scenario(std::size_t n, std::size_t n_tones, std::uint64_t seed, double budget_w) {
  SeededStream st(seed);
  std::vector<ToneChannel> tones;
  for (std::size_t i = 0; i < n_tones; ++i) {
    std::vector<cplx> row(n);
    row[0] = {1.0 + st.uniform(), 0.0};
    for (std::size_t k = 1; k <= n / 2; ++k) {
      const cplx c = st.complex_normal(0.02);
      row[k] = c;
      row[n - k] = c;
    }
    CMatrix h(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) h(r, c) = row[(c + n - r) % n];
    tones.push_back(tone(i, std::move(h), scaled_identity(n, 0.01 + 0.02 * st.uniform())));
  }
  return scenario(std::move(tones), std::vector<double>(n, budget_w));
}

// Two lines, two tones, coupled complex channels and correlated noise with
// unequal budgets.
inline Scenario coupled_pair(std::uint64_t seed) {
  SeededStream st(seed);
  std::vector<ToneChannel> tones;
  for (std::size_t i = 0; i < 2; ++i) {
    CMatrix h = random_matrix(st, 2, 2, 0.15);
    h(0, 0) += cplx{1.0, 0.0};
    h(1, 1) += cplx{0.7, 0.0};
    tones.push_back(tone(i, std::move(h), random_noise(st, 2, 1, 0.05, 0.05)));
  }
  return scenario(std::move(tones), {1.0, 0.5});
}

// The coupled example with H = [[1, 0.5], [0.5, 1]] on two tones.
inline Scenario symmetric_pair() {
  std::vector<ToneChannel> tones;
  for (std::size_t i = 0; i < 2; ++i) tones.push_back(tone(i, real_matrix(2, 2, {1.0, 0.5, 0.5, 1.0}), diag({1.0, 1.0})));
  return scenario(std::move(tones), {1.0, 1.0});
}

}  // namespace dsmopt::fixtures
