#include <algorithm>
#include <cmath>
#include <numbers>

#include "dsmopt/errors.hpp"
#include "dsmopt/spectra.hpp"

namespace dsmopt::spectra {

using numlin::cplx;

void SolverOptions::validate() const {
  if (!(eps_power > 0.0) || !(eps_mask > 0.0) || !(lambda_floor > 0.0) || !(kkt_tol > 0.0)) {
    throw InvalidInput("solver tolerances and lambda_floor must be positive");
  }
  if (max_outer < 1 || max_bisect < 1) throw InvalidInput("iteration caps must be >= 1");
}

Multipliers Multipliers::zeros(std::size_t n_lines, std::size_t n_tones) {
  return {std::vector<double>(n_lines, 0.0), std::vector<std::vector<double>>(n_lines, std::vector<double>(n_tones, 0.0))};
}

std::vector<double> Multipliers::tone_prices(std::size_t tone, double floor) const {
  std::vector<double> p(lambda.size());
  for (std::size_t n = 0; n < lambda.size(); ++n) {
    const double mu_ni = (n < mu.size() && tone < mu[n].size()) ? mu[n][tone] : 0.0;
    p[n] = std::max(lambda[n] + mu_ni, floor);
  }
  return p;
}

ToneSolution tone_solve(const ToneChannel& tc, std::span<const double> lam, double gamma) {
  return tone_solve(kernels::prepare_tone(tc), lam, gamma);
}

ToneSolution tone_solve(const kernels::PreparedTone& pt, std::span<const double> lam, double gamma) {
  const std::size_t n = pt.whitened.rows();
  if (lam.size() != n) throw DimensionMismatch("tone_solve: price vector length != n_lines");
  std::vector<double> inv_sqrt(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(lam[k] > 0.0)) throw InvalidInput("tone_solve: prices must be positive");
    inv_sqrt[k] = 1.0 / std::sqrt(lam[k]);
  }

  ToneSolution sol;
  sol.factors = numlin::svd(numlin::scale_columns(pt.whitened, inv_sqrt));
  const auto& d = sol.factors.d;
  const CMatrix& v = sol.factors.V;

  sol.s_tilde.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double d2 = d[j] * d[j];
    if (d2 > gamma) {
      sol.s_tilde[j] = 1.0 - gamma / d2;
      sol.b_nats += std::log1p(sol.s_tilde[j] * d2 / gamma);
    }
  }

  CMatrix phi(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c <= r; ++c) {
      cplx acc{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j)
        if (sol.s_tilde[j] > 0.0) acc += v(r, j) * sol.s_tilde[j] * std::conj(v(c, j));
      phi(r, c) = acc * (inv_sqrt[r] * inv_sqrt[c]);
    }
  sol.Phi = HermitianPSD::from_lower_unchecked(phi);
  sol.phi_diag = numlin::diagonal_real(sol.Phi.matrix());
  return sol;
}

double rate_of_cov(const kernels::PreparedTone& pt, const CMatrix& phi, double gamma) {
  const std::size_t n = pt.whitened.rows();
  if (phi.rows() != n || phi.cols() != n) throw DimensionMismatch("rate_of_cov: covariance dimension");
  const CMatrix q = pt.whitened * phi * numlin::adjoint(pt.whitened);
  CMatrix m = CMatrix::identity(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c <= r; ++c) m(r, c) += q(r, c) / gamma;
  const CMatrix l = numlin::cholesky(m);
  double logdet = 0.0;
  for (std::size_t k = 0; k < n; ++k) logdet += 2.0 * std::log(l(k, k).real());
  return std::max(logdet, 0.0);
}

double rate_of_cov(const ToneChannel& tc, const HermitianPSD& phi, double gamma) {
  return rate_of_cov(kernels::prepare_tone(tc), phi.matrix(), gamma);
}

double dual_value(const Scenario& s, const Multipliers& m, const SolverOptions& opts) {
  const std::size_t n_lines = s.n_lines;
  if (m.lambda.size() != n_lines) throw DimensionMismatch("dual_value: lambda length");
  for (double l : m.lambda)
    if (l < 0.0) throw InvalidInput("dual_value: negative multiplier");

  std::vector<double> per_tone(s.n_tones(), 0.0);
  kernels::for_each_tone(s.n_tones(), opts.execution, [&](std::size_t i) {
    const auto prices = m.tone_prices(i, opts.lambda_floor);
    const ToneSolution sol = tone_solve(s.tones[i], prices, s.gamma);
    double v = sol.b_nats;
    for (std::size_t n = 0; n < n_lines; ++n) v -= prices[n] * sol.phi_diag[n];
    per_tone[i] = v;
  });

  double value = 0.0;
  for (double v : per_tone) value += v;
  for (std::size_t n = 0; n < n_lines; ++n)
    if (m.lambda[n] > 0.0) value += m.lambda[n] * s.p_tot_w[n];
  for (std::size_t n = 0; n < m.mu.size(); ++n)
    for (std::size_t i = 0; i < m.mu[n].size(); ++i)
      if (m.mu[n][i] > 0.0) value += m.mu[n][i] * s.mask_w[n][i];
  return value;
}

void finish_allocation(const Scenario& s, Allocation& a) {
  const std::size_t n_lines = s.n_lines;
  const std::size_t n_tones = s.n_tones();
  a.psd.assign(n_lines, std::vector<double>(n_tones, 0.0));
  for (std::size_t i = 0; i < n_tones; ++i)
    for (std::size_t n = 0; n < n_lines; ++n) a.psd[n][i] = a.cov[i](n, n).real();

  a.per_modem_power.assign(n_lines, 0.0);
  a.rates_per_line.assign(n_lines, 0.0);
  for (std::size_t n = 0; n < n_lines; ++n) {
    double p = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < n_tones; ++i) {
      p += a.psd[n][i];
      b += a.line_b_nats[n][i];
    }
    a.per_modem_power[n] = p;
    a.rates_per_line[n] = s.f_sym_hz * b / std::numbers::ln2;
  }
  double total = 0.0;
  for (double b : a.b_nats) total += b;
  a.sum_rate = s.f_sym_hz * total / std::numbers::ln2;
}

Allocation zero_allocation(const Scenario& s, std::string algorithm, Multipliers m) {
  Allocation a;
  a.algorithm = std::move(algorithm);
  a.multipliers = std::move(m);
  a.cov.assign(s.n_tones(), HermitianPSD::from_lower_unchecked(CMatrix(s.n_lines, s.n_lines)));
  a.line_b_nats.assign(s.n_lines, std::vector<double>(s.n_tones(), 0.0));
  a.b_nats.assign(s.n_tones(), 0.0);
  a.diagnostics.converged = true;
  finish_allocation(s, a);
  return a;
}

// ---------------------------------------------------------------------------
// KKT audit

bool AuditReport::pass(double tol) const {
  return feasibility <= tol && dual_feasibility <= tol && comp_slack <= tol && stationarity <= tol;
}

AuditReport kkt_audit(const Scenario& s, const Allocation& a, const SolverOptions& opts) {
  const std::size_t n_lines = s.n_lines;
  const std::size_t n_tones = s.n_tones();
  if (a.cov.size() != n_tones || a.multipliers.lambda.size() != n_lines) {
    throw DimensionMismatch("kkt_audit: allocation does not match scenario");
  }
  const bool masked = s.mode == binder::ConstraintMode::per_modem_mask;

  AuditReport r;
  r.converged = a.diagnostics.converged;

  std::vector<double> power(n_lines, 0.0);
  for (std::size_t i = 0; i < n_tones; ++i)
    for (std::size_t n = 0; n < n_lines; ++n) power[n] += a.cov[i](n, n).real();

  const bool total_mode = s.mode == binder::ConstraintMode::total;
  if (total_mode) {
    double p = 0.0;
    for (double v : power) p += v;
    const double budget = s.total_budget_w();
    if (budget > 0.0) r.power_violation = std::max(0.0, (p - budget) / budget);
  } else {
    for (std::size_t n = 0; n < n_lines; ++n) {
      const double budget = s.p_tot_w[n];
      if (budget > 0.0) {
        r.power_violation = std::max(r.power_violation, (power[n] - budget) / budget);
      } else if (power[n] > 0.0) {
        r.power_violation = std::max(r.power_violation, 1.0);
      }
    }
  }
  if (masked) {
    for (std::size_t n = 0; n < n_lines; ++n)
      for (std::size_t i = 0; i < n_tones; ++i) {
        const double m = s.mask_w[n][i];
        if (m == binder::kInf) continue;
        const double phi = a.cov[i](n, n).real();
        if (m > 0.0) {
          r.mask_violation = std::max(r.mask_violation, (phi - m) / m);
        } else if (phi > 0.0) {
          r.mask_violation = std::max(r.mask_violation, 1.0);
        }
      }
  }

  // Per-tone scale for the PSD and stationarity normalizations: the
  // average per-tone share of the budget.
  double scale = 0.0;
  for (double p : s.p_tot_w) scale = std::max(scale, p);
  scale = n_tones ? scale / static_cast<double>(n_tones) : 1.0;
  if (!(scale > 0.0)) scale = 1.0;

  std::vector<double> psd_res(n_tones, 0.0), stat_res(n_tones, 0.0), mask_cs(n_tones, 0.0);
  kernels::for_each_tone(n_tones, opts.execution, [&](std::size_t i) {
    const CMatrix& phi = a.cov[i].matrix();
    const double tr = numlin::trace_real(phi);
    psd_res[i] = numlin::negative_eigenvalue_magnitude(phi) / (std::abs(tr) + scale);

    const auto prices = a.multipliers.tone_prices(i, opts.lambda_floor);
    const ToneSolution best = tone_solve(s.tones[i], prices, s.gamma);
    const double fro = numlin::frobenius_norm(phi);
    const double fro_best = numlin::frobenius_norm(best.Phi.matrix());
    stat_res[i] = numlin::frobenius_norm(phi - best.Phi.matrix()) / std::max({fro, fro_best, scale});

    if (masked && !a.multipliers.mu.empty()) {
      double worst = 0.0;
      for (std::size_t n = 0; n < n_lines; ++n) {
        const double mu = a.multipliers.mu[n][i];
        const double m = s.mask_w[n][i];
        if (mu <= 0.0) continue;
        if (m == binder::kInf) {
          worst = std::max(worst, 1.0);
          continue;
        }
        worst = std::max(worst, std::abs(mu * (phi(n, n).real() - m)) / (1.0 + mu * m));
      }
      mask_cs[i] = worst;
    }
  });
  for (std::size_t i = 0; i < n_tones; ++i) {
    r.psd_violation = std::max(r.psd_violation, psd_res[i]);
    r.stationarity = std::max(r.stationarity, stat_res[i]);
    r.comp_slack = std::max(r.comp_slack, mask_cs[i]);
  }
  r.feasibility = std::max({r.power_violation, r.mask_violation, r.psd_violation});

  double min_mult = 0.0;
  for (double l : a.multipliers.lambda) min_mult = std::min(min_mult, l);
  for (const auto& row : a.multipliers.mu)
    for (double m : row) min_mult = std::min(min_mult, m);
  r.dual_feasibility = std::max(0.0, -min_mult);

  if (total_mode) {
    double p = 0.0;
    for (double v : power) p += v;
    const double lam = a.multipliers.lambda.empty() ? 0.0 : a.multipliers.lambda[0];
    const double budget = s.total_budget_w();
    if (lam > 0.0 && std::isfinite(lam)) r.comp_slack = std::max(r.comp_slack, std::abs(lam * (p - budget)) / (1.0 + lam * budget));
  } else {
    for (std::size_t n = 0; n < n_lines; ++n) {
      const double lam = a.multipliers.lambda[n];
      const double budget = s.p_tot_w[n];
      if (lam > 0.0 && std::isfinite(lam)) {
        r.comp_slack = std::max(r.comp_slack, std::abs(lam * (power[n] - budget)) / (1.0 + lam * budget));
      }
    }
  }

  double primal = 0.0;
  for (double b : a.b_nats) primal += b;
  bool finite_multipliers = true;
  for (double l : a.multipliers.lambda) finite_multipliers = finite_multipliers && std::isfinite(l);
  if (finite_multipliers) {
    Multipliers m = a.multipliers;
    if (total_mode) {
      // The total-power dual prices sum_n P_n with the common multiplier.
      m.lambda.assign(n_lines, a.multipliers.lambda.empty() ? 0.0 : a.multipliers.lambda[0]);
    }
    const double dual = dual_value(s, m, opts);
    r.duality_gap = (dual - primal) / (1.0 + std::abs(primal));
  }
  return r;
}

}  // namespace dsmopt::spectra
