#include "dsmopt/structures.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "dsmopt/errors.hpp"
#include "dsmopt/rng.hpp"

namespace dsmopt::structures {

using numlin::cplx;

TxRxPair make_txrx(const ToneChannel& tc, std::span<const double> lam, const spectra::ToneSolution& sol) {
  const std::size_t n = tc.H.rows();
  if (lam.size() != n || sol.factors.d.size() != n) throw DimensionMismatch("make_txrx: dimension");
  std::vector<double> inv_sqrt(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(lam[k] > 0.0)) throw InvalidInput("make_txrx: prices must be positive");
    inv_sqrt[k] = 1.0 / std::sqrt(lam[k]);
  }
  const CMatrix l = numlin::cholesky(tc.R);
  const CMatrix l_inv = numlin::solve_lower(l, CMatrix::identity(n));
  return {numlin::scale_rows(sol.factors.V, inv_sqrt), numlin::adjoint(sol.factors.U) * l_inv, sol.factors.d};
}

SisoReport monte_carlo_siso(const TxRxPair& pair, const ToneChannel& tc, std::span<const double> s_tilde,
                            std::size_t n_draws, std::uint64_t seed) {
  const std::size_t n = tc.H.rows();
  if (n_draws < 1) throw InvalidInput("monte_carlo_siso: n_draws must be >= 1");
  if (s_tilde.size() != n || pair.d.size() != n) throw DimensionMismatch("monte_carlo_siso: dimension");

  const CMatrix l = numlin::cholesky(tc.R);
  SeededStream symbols(derive_seed(seed, {1}));
  SeededStream noise(derive_seed(seed, {2}));

  std::vector<cplx> xt(n), w(n), x(n), y(n), z(n), e(n);
  CMatrix acc(n, n);
  std::vector<double> sig(n, 0.0);
  for (std::size_t t = 0; t < n_draws; ++t) {
    for (std::size_t j = 0; j < n; ++j) xt[j] = s_tilde[j] > 0.0 ? symbols.complex_normal(s_tilde[j]) : cplx{};
    for (std::size_t j = 0; j < n; ++j) w[j] = noise.complex_normal(1.0);
    for (std::size_t r = 0; r < n; ++r) {
      cplx v{};
      for (std::size_t c = 0; c < n; ++c) v += pair.tx(r, c) * xt[c];
      x[r] = v;
    }
    for (std::size_t r = 0; r < n; ++r) {
      cplx v{};
      for (std::size_t c = 0; c < n; ++c) v += tc.H(r, c) * x[c];
      for (std::size_t c = 0; c <= r; ++c) v += l(r, c) * w[c];
      y[r] = v;
    }
    for (std::size_t r = 0; r < n; ++r) {
      cplx v{};
      for (std::size_t c = 0; c < n; ++c) v += pair.rx(r, c) * y[c];
      z[r] = v;
      e[r] = v - pair.d[r] * xt[r];
      sig[r] += std::norm(pair.d[r] * xt[r]);
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) acc(r, c) += e[r] * std::conj(e[c]);
  }

  SisoReport rep;
  rep.n_draws = n_draws;
  const double inv = 1.0 / static_cast<double>(n_draws);
  rep.error_cov = cplx{inv, 0.0} * acc;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const cplx target = r == c ? cplx{1.0, 0.0} : cplx{};
      rep.max_cov_deviation = std::max(rep.max_cov_deviation, std::abs(rep.error_cov(r, c) - target));
    }
  rep.empirical_snr.resize(n);
  rep.expected_snr.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double noise_power = rep.error_cov(j, j).real();
    rep.empirical_snr[j] = noise_power > 0.0 ? sig[j] * inv / noise_power : 0.0;
    rep.expected_snr[j] = s_tilde[j] * pair.d[j] * pair.d[j];
    if (rep.expected_snr[j] > 0.0) {
      rep.max_snr_rel_error =
          std::max(rep.max_snr_rel_error, std::abs(rep.empirical_snr[j] - rep.expected_snr[j]) / rep.expected_snr[j]);
    }
  }
  return rep;
}

ScalarWaterfill capped_waterfill(std::span<const double> gain, std::span<const double> cap, double budget) {
  if (gain.size() != cap.size()) throw DimensionMismatch("capped_waterfill: gain/cap length");
  const std::size_t m = gain.size();
  ScalarWaterfill out;
  out.s.assign(m, 0.0);
  if (!(budget > 0.0)) return out;

  auto fill = [&](double w, std::vector<double>& s) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      s[i] = 0.0;
      if (!(gain[i] > 0.0) || !(cap[i] > 0.0)) continue;
      s[i] = std::clamp(w - 1.0 / gain[i], 0.0, cap[i]);
      total += s[i];
    }
    return total;
  };

  double cap_sum = 0.0;
  double max_floor = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(gain[i] > 0.0) || !(cap[i] > 0.0)) continue;
    any = true;
    cap_sum += cap[i];
    max_floor = std::max(max_floor, 1.0 / gain[i] + std::min(cap[i], budget));
  }
  if (!any) return out;
  if (cap_sum <= budget) {
    for (std::size_t i = 0; i < m; ++i)
      if (gain[i] > 0.0 && cap[i] > 0.0) out.s[i] = cap[i];
    out.level = max_floor;
    out.slack = true;
    return out;
  }

  double lo = 0.0;
  double hi = max_floor;
  std::vector<double> tmp(m);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fill(mid, tmp) > budget ? hi : lo) = mid;
  }
  // The lower end never overshoots; spread the remainder evenly over the
  // tones still below their caps so the budget is met to rounding.
  const double total = fill(lo, out.s);
  out.level = lo;
  double room = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (out.s[i] > 0.0 && out.s[i] < cap[i]) room += 1.0;
  if (room > 0.0 && total < budget) {
    const double extra = (budget - total) / room;
    for (std::size_t i = 0; i < m; ++i)
      if (out.s[i] > 0.0 && out.s[i] < cap[i]) out.s[i] = std::min(cap[i], out.s[i] + extra);
  }
  return out;
}

CMatrix dp_precoder(const ToneChannel& tc) {
  const std::size_t n = tc.H.rows();
  CMatrix inv;
  try {
    inv = numlin::inverse(tc.H);
  } catch (const SingularMatrix& e) {
    throw SingularChannel(std::string("diagonalizing precoder: ") + e.what());
  }
  CMatrix f(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) f(r, c) = inv(r, c) * tc.H(c, c);
  return f;
}

std::vector<double> zf_noise(const ToneChannel& tc) {
  const std::size_t n = tc.H.rows();
  const CMatrix l = numlin::cholesky(tc.R);
  const CMatrix hw = numlin::solve_lower(l, tc.H);
  CMatrix g = numlin::adjoint(hw) * hw;
  CMatrix inv;
  try {
    inv = numlin::inverse(g, 1e-12);
  } catch (const SingularMatrix& e) {
    throw RankDeficient(std::string("zero-forcing receiver: ") + e.what());
  }
  std::vector<double> nu(n);
  for (std::size_t k = 0; k < n; ++k) {
    nu[k] = inv(k, k).real();
    if (!(nu[k] > 0.0)) throw RankDeficient("zero-forcing receiver: non-positive post-detection noise");
  }
  return nu;
}

namespace {

bool honors_masks(const Scenario& s) { return s.mode == binder::ConstraintMode::per_modem_mask; }

std::vector<double> line_caps(const Scenario& s, std::size_t n) {
  if (!honors_masks(s)) return std::vector<double>(s.n_tones(), binder::kInf);
  return s.mask_w[n];
}

spectra::Allocation make_allocation(const Scenario& s, std::string name) {
  spectra::Allocation a;
  a.algorithm = std::move(name);
  a.multipliers = spectra::Multipliers::zeros(s.n_lines, s.n_tones());
  a.cov.assign(s.n_tones(), numlin::HermitianPSD::from_lower_unchecked(CMatrix(s.n_lines, s.n_lines)));
  a.line_b_nats.assign(s.n_lines, std::vector<double>(s.n_tones(), 0.0));
  a.b_nats.assign(s.n_tones(), 0.0);
  return a;
}

void fill_levels(spectra::Allocation& a, const std::vector<ScalarWaterfill>& wf) {
  for (std::size_t n = 0; n < wf.size(); ++n) a.multipliers.lambda[n] = wf[n].level > 0.0 ? 1.0 / wf[n].level : 0.0;
}

}  // namespace

spectra::Allocation dp_baseline(const Scenario& s, const spectra::SolverOptions& opts) {
  opts.validate();
  const std::size_t n_lines = s.n_lines;
  const std::size_t n_tones = s.n_tones();
  spectra::Allocation a = make_allocation(s, "dp");

  std::vector<std::optional<CMatrix>> f(n_tones);
  std::vector<std::vector<double>> gain(n_lines, std::vector<double>(n_tones, 0.0));
  kernels::for_each_tone(n_tones, opts.execution, [&](std::size_t i) {
    const ToneChannel& tc = s.tones[i];
    if (tc.dead()) return;
    try {
      f[i] = dp_precoder(tc);
    } catch (const SingularChannel&) {
      return;
    }
    for (std::size_t n = 0; n < n_lines; ++n) gain[n][i] = std::norm(tc.H(n, n)) / (s.gamma * tc.R(n, n).real());
  });
  for (std::size_t i = 0; i < n_tones; ++i)
    if (!f[i] && !s.tones[i].dead()) ++a.diagnostics.skipped_tones;

  // Output power of line n on tone i: sum_m |F_nm|^2 s_m.
  auto output_psd = [&](const std::vector<std::vector<double>>& sv, std::size_t i, std::vector<double>& t) {
    t.assign(n_lines, 0.0);
    if (!f[i]) return;
    for (std::size_t n = 0; n < n_lines; ++n)
      for (std::size_t m = 0; m < n_lines; ++m) t[n] += std::norm((*f[i])(n, m)) * sv[m][i];
  };

  std::vector<std::vector<double>> caps(n_lines);
  for (std::size_t n = 0; n < n_lines; ++n) caps[n] = line_caps(s, n);

  std::vector<double> budget = s.p_tot_w;
  std::vector<std::vector<double>> sv(n_lines);
  std::vector<ScalarWaterfill> wf(n_lines);
  std::vector<double> totals(n_lines);
  std::vector<double> t;
  constexpr int kBudgetRounds = 8;
  for (int round = 0; round < kBudgetRounds; ++round) {
    for (std::size_t n = 0; n < n_lines; ++n) {
      wf[n] = capped_waterfill(gain[n], caps[n], budget[n]);
      sv[n] = wf[n].s;
    }
    std::fill(totals.begin(), totals.end(), 0.0);
    for (std::size_t i = 0; i < n_tones; ++i) {
      output_psd(sv, i, t);
      double alpha = 1.0;
      for (std::size_t n = 0; n < n_lines; ++n)
        if (t[n] > caps[n][i]) alpha = std::min(alpha, caps[n][i] / t[n]);
      for (std::size_t n = 0; n < n_lines; ++n) {
        sv[n][i] *= alpha;
        totals[n] += t[n] * alpha;
      }
    }
    bool within = true;
    for (std::size_t n = 0; n < n_lines; ++n) {
      if (totals[n] > s.p_tot_w[n] * (1.0 + opts.eps_power)) {
        within = false;
        budget[n] *= s.p_tot_w[n] / totals[n];
      }
    }
    a.diagnostics.iterations = round + 1;
    if (within) break;
  }
  // Whatever is still over budget is removed by one common scale, which
  // keeps every mask satisfied.
  double beta = 1.0;
  for (std::size_t n = 0; n < n_lines; ++n)
    if (totals[n] > s.p_tot_w[n]) beta = std::min(beta, s.p_tot_w[n] / totals[n]);
  if (beta < 1.0)
    for (auto& row : sv)
      for (double& x : row) x *= beta;

  kernels::for_each_tone(n_tones, opts.execution, [&](std::size_t i) {
    if (!f[i]) return;
    const CMatrix& fi = *f[i];
    CMatrix phi(n_lines, n_lines);
    for (std::size_t r = 0; r < n_lines; ++r)
      for (std::size_t c = 0; c <= r; ++c) {
        cplx acc{};
        for (std::size_t m = 0; m < n_lines; ++m) acc += fi(r, m) * sv[m][i] * std::conj(fi(c, m));
        phi(r, c) = acc;
      }
    a.cov[i] = numlin::HermitianPSD::from_lower_unchecked(phi);
    double b = 0.0;
    for (std::size_t n = 0; n < n_lines; ++n) {
      const double bn = std::log1p(gain[n][i] * sv[n][i]);
      a.line_b_nats[n][i] = bn;
      b += bn;
    }
    a.b_nats[i] = b;
  });
  fill_levels(a, wf);
  a.diagnostics.converged = true;
  spectra::finish_allocation(s, a);
  return a;
}

spectra::Allocation zf_baseline(const Scenario& s, const spectra::SolverOptions& opts) {
  opts.validate();
  const std::size_t n_lines = s.n_lines;
  const std::size_t n_tones = s.n_tones();
  spectra::Allocation a = make_allocation(s, "zf");

  std::vector<std::vector<double>> gain(n_lines, std::vector<double>(n_tones, 0.0));
  std::vector<char> skipped(n_tones, 0);
  kernels::for_each_tone(n_tones, opts.execution, [&](std::size_t i) {
    const ToneChannel& tc = s.tones[i];
    if (tc.dead()) return;
    std::vector<double> nu;
    try {
      nu = zf_noise(tc);
    } catch (const RankDeficient&) {
      skipped[i] = 1;
      return;
    }
    for (std::size_t n = 0; n < n_lines; ++n) gain[n][i] = 1.0 / (s.gamma * nu[n]);
  });
  for (char c : skipped) a.diagnostics.skipped_tones += c ? 1 : 0;

  std::vector<ScalarWaterfill> wf(n_lines);
  for (std::size_t n = 0; n < n_lines; ++n) wf[n] = capped_waterfill(gain[n], line_caps(s, n), s.p_tot_w[n]);

  for (std::size_t i = 0; i < n_tones; ++i) {
    CMatrix phi(n_lines, n_lines);
    double b = 0.0;
    for (std::size_t n = 0; n < n_lines; ++n) {
      phi(n, n) = wf[n].s[i];
      const double bn = std::log1p(gain[n][i] * wf[n].s[i]);
      a.line_b_nats[n][i] = bn;
      b += bn;
    }
    a.cov[i] = numlin::HermitianPSD::from_lower_unchecked(phi);
    a.b_nats[i] = b;
  }
  fill_levels(a, wf);
  a.diagnostics.iterations = 1;
  a.diagnostics.converged = true;
  spectra::finish_allocation(s, a);
  return a;
}

}  // namespace dsmopt::structures
