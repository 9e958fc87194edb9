#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "dsmopt/errors.hpp"
#include "dsmopt/spectra.hpp"

namespace dsmopt::spectra {

namespace {

using kernels::PreparedTone;

// Price of a line with a zero budget: it stays silent on every tone.
constexpr double kInfPrice = std::numeric_limits<double>::infinity();

// Solves g(u) = target for u in (0, u_max], g non-decreasing in u (power as
// a function of the inverse price). Secant steps inside a maintained
// bracket, bisection when the secant leaves it or stalls, geometric
// expansion until a bracket exists. The last evaluated point is the one
// returned, so callers holding evaluation state stay consistent with it.
struct RootResult {
  double u = 0.0;
  double value = 0.0;
  bool converged = false;
  bool at_cap = false;  // g(u_max) < target
  int evals = 0;
};

template <class G>
RootResult solve_increasing(G&& g, double u0, double g0, double target, double tol, double u_max, int max_iter) {
  RootResult res{u0, g0, false, false, 0};
  if (std::abs(g0 - target) <= tol) {
    res.converged = true;
    return res;
  }
  if (g0 < target && u0 >= u_max) {
    res.at_cap = true;
    return res;
  }

  double lo = 0.0, g_lo = 0.0;  // g(lo) < target; lo = 0 means unknown
  double hi = 0.0, g_hi = 0.0;  // g(hi) > target; hi = 0 means unknown
  bool have_lo = false, have_hi = false;
  auto record = [&](double u, double gu) {
    if (gu < target) {
      if (!have_lo || u > lo) lo = u, g_lo = gu, have_lo = true;
    } else {
      if (!have_hi || u < hi) hi = u, g_hi = gu, have_hi = true;
    }
  };
  record(u0, g0);

  double prev_u = u0, prev_g = g0;
  double u = (g0 > 0.0) ? u0 * target / g0 : u0 * 4.0;
  u = std::clamp(u, u0 / 64.0, u0 * 64.0);
  u = std::min(u, u_max);
  double last_width = have_lo && have_hi ? hi - lo : 0.0;
  bool force_bisect = false;

  for (int it = 0; it < max_iter; ++it) {
    const double gu = g(u);
    ++res.evals;
    res.u = u;
    res.value = gu;
    if (std::abs(gu - target) <= tol) {
      res.converged = true;
      return res;
    }
    if (gu < target && u >= u_max) {
      res.at_cap = true;
      return res;
    }
    record(u, gu);

    double next = std::numeric_limits<double>::quiet_NaN();
    if (gu != prev_g) next = u + (target - gu) * (u - prev_u) / (gu - prev_g);

    if (have_lo && have_hi) {
      const double width = hi - lo;
      if (last_width > 0.0 && width > 0.5 * last_width) force_bisect = !force_bisect;
      else force_bisect = false;
      last_width = width;
      if (force_bisect || !(next > lo && next < hi)) {
        // Regula falsi point of the bracket, then bisection if that stalls too.
        next = force_bisect ? 0.5 * (lo + hi) : lo + (target - g_lo) * (hi - lo) / (g_hi - g_lo);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      }
      if (hi - lo <= 1e-15 * hi) {
        res.converged = std::abs(gu - target) <= tol;
        return res;
      }
    } else if (!have_hi) {
      // Still below the target: move up.
      if (!(next > u) || !std::isfinite(next)) next = u * 4.0;
      next = std::min({next, u * 16.0, u_max});
    } else {
      if (!(next < u) || !(next > 0.0)) next = u / 4.0;
      next = std::max(next, u / 16.0);
    }
    prev_u = u;
    prev_g = gu;
    u = next;
  }
  return res;
}

// Holds the prepared tones and the latest full-binder evaluation.
class Evaluator {
 public:
  Evaluator(const Scenario& s, const SolverOptions& opts)
      : s_(s), opts_(opts), tones_(kernels::prepare_tones(s, opts.execution)) {}

  std::size_t n_lines() const { return s_.n_lines; }
  std::size_t n_tones() const { return s_.n_tones(); }
  const std::vector<PreparedTone>& tones() const { return tones_; }

  double price(const std::vector<double>& lambda, const std::vector<std::vector<double>>* kappa, std::size_t i,
               std::size_t n) const {
    double p = lambda[n];
    if (kappa) p = std::max(p, (*kappa)[n][i]);
    return std::max(p, opts_.lambda_floor);
  }

  void evaluate(const std::vector<double>& lambda, const std::vector<std::vector<double>>* kappa) {
    kernels::evaluate_tones(
        tones_, n_lines(), s_.gamma, [&](std::size_t i, std::size_t n) { return price(lambda, kappa, i, n); },
        opts_.execution, phi_, b_);
    powers_ = kernels::line_powers(phi_, n_lines());
    ++evaluations_;
  }

  // Re-sums powers after per-tone slots were updated in place.
  void refresh_powers() { powers_ = kernels::line_powers(phi_, n_lines()); }

  const std::vector<double>& powers() const { return powers_; }
  std::vector<double>& phi() { return phi_; }
  std::vector<double>& b() { return b_; }
  long long evaluations() const { return evaluations_; }

 private:
  const Scenario& s_;
  const SolverOptions& opts_;
  std::vector<PreparedTone> tones_;
  std::vector<double> phi_, b_, powers_;
  long long evaluations_ = 0;
};

std::size_t active_tone_count(const std::vector<PreparedTone>& tones) {
  std::size_t c = 0;
  for (const auto& t : tones) c += t.dead ? 0 : 1;
  return c;
}

bool line_done(double power, double budget, double lambda, const SolverOptions& opts) {
  if (budget <= 0.0) return true;
  if (std::abs(power - budget) <= opts.eps_power * budget) return true;
  return lambda <= opts.lambda_floor && power <= budget * (1.0 + opts.eps_power);
}

// One Gauss-Seidel pass over the line prices at fixed kappa. Returns false
// when some coordinate search hit its iteration cap.
bool sweep_lambdas(Evaluator& ev, const Scenario& s, const SolverOptions& opts, std::vector<double>& lambda,
                   const std::vector<std::vector<double>>* kappa) {
  bool ok = true;
  const double u_max = 1.0 / opts.lambda_floor;
  for (std::size_t n = 0; n < s.n_lines; ++n) {
    const double budget = s.p_tot_w[n];
    if (budget <= 0.0) continue;
    if (line_done(ev.powers()[n], budget, lambda[n], opts)) continue;
    auto g = [&](double u) {
      lambda[n] = 1.0 / u;
      ev.evaluate(lambda, kappa);
      return ev.powers()[n];
    };
    const double u0 = 1.0 / std::max(lambda[n], opts.lambda_floor);
    const RootResult r =
        solve_increasing(g, u0, ev.powers()[n], budget, 0.5 * opts.eps_power * budget, u_max, opts.max_bisect);
    if (r.at_cap) {
      if (lambda[n] != opts.lambda_floor) {
        lambda[n] = opts.lambda_floor;
        ev.evaluate(lambda, kappa);
      }
    } else {
      lambda[n] = 1.0 / r.u;
      ok = ok && r.converged;
    }
  }
  return ok;
}

std::vector<double> initial_lambdas(const Scenario& s, std::size_t active) {
  std::vector<double> lambda(s.n_lines, kInfPrice);
  for (std::size_t n = 0; n < s.n_lines; ++n)
    if (s.p_tot_w[n] > 0.0) lambda[n] = static_cast<double>(std::max<std::size_t>(active, 1)) / s.p_tot_w[n];
  return lambda;
}

// Builds the full allocation (covariances, stream attribution) at the
// final per-tone prices.
Allocation assemble(const Scenario& s, const Evaluator& ev, const SolverOptions& opts, std::string algorithm,
                    const std::vector<double>& lambda, const std::vector<std::vector<double>>* kappa) {
  const std::size_t n_lines = s.n_lines;
  const std::size_t n_tones = s.n_tones();
  Allocation a;
  a.algorithm = std::move(algorithm);
  a.multipliers.lambda = lambda;
  a.multipliers.mu.assign(n_lines, std::vector<double>(n_tones, 0.0));
  if (kappa) {
    for (std::size_t n = 0; n < n_lines; ++n)
      for (std::size_t i = 0; i < n_tones; ++i) a.multipliers.mu[n][i] = std::max(0.0, (*kappa)[n][i] - lambda[n]);
  }
  a.cov.resize(n_tones);
  a.b_nats.assign(n_tones, 0.0);
  a.line_b_nats.assign(n_lines, std::vector<double>(n_tones, 0.0));
  kernels::for_each_tone(n_tones, opts.execution, [&](std::size_t i) {
    std::vector<double> prices(n_lines);
    for (std::size_t n = 0; n < n_lines; ++n) prices[n] = ev.price(lambda, kappa, i, n);
    const ToneSolution sol = tone_solve(ev.tones()[i], prices, s.gamma);
    a.cov[i] = sol.Phi;
    a.b_nats[i] = sol.b_nats;
    // Stream j (j-th strongest mode) is credited to line j.
    for (std::size_t j = 0; j < n_lines; ++j)
      if (sol.s_tilde[j] > 0.0) a.line_b_nats[j][i] = std::log1p(sol.s_tilde[j] * sol.factors.d[j] * sol.factors.d[j] / s.gamma);
  });
  finish_allocation(s, a);
  return a;
}

void fill_residuals(const Scenario& s, const SolverOptions& opts, Allocation& a, bool total) {
  double worst = 0.0;
  if (total) {
    double p = 0.0;
    for (double v : a.per_modem_power) p += v;
    const double budget = s.total_budget_w();
    const bool slack = a.multipliers.lambda.empty() || a.multipliers.lambda[0] <= opts.lambda_floor;
    if (budget > 0.0) {
      const double rel = (p - budget) / budget;
      worst = slack ? std::max(rel, 0.0) : std::abs(rel);
    }
  } else {
    for (std::size_t n = 0; n < s.n_lines; ++n) {
      const double budget = s.p_tot_w[n];
      if (budget <= 0.0) continue;
      const double rel = (a.per_modem_power[n] - budget) / budget;
      const bool slack = a.multipliers.lambda[n] <= opts.lambda_floor;
      worst = std::max(worst, slack ? std::max(rel, 0.0) : std::abs(rel));
    }
  }
  a.diagnostics.power_residual = worst;
  double mask = 0.0;
  for (std::size_t n = 0; n < s.n_lines; ++n)
    for (std::size_t i = 0; i < s.n_tones(); ++i) {
      const double m = s.mask_w[n][i];
      if (m != binder::kInf && m > 0.0) mask = std::max(mask, (a.psd[n][i] - m) / m);
    }
  a.diagnostics.mask_residual = mask;
}

}  // namespace

// ---------------------------------------------------------------------------

Allocation algo1_total_power(const Scenario& s, const SolverOptions& opts) {
  opts.validate();
  const std::size_t n_lines = s.n_lines;
  const auto prepared = kernels::prepare_tones(s, opts.execution);
  std::vector<std::vector<double>> sig2(s.n_tones());
  kernels::for_each_tone(s.n_tones(), opts.execution, [&](std::size_t i) {
    if (prepared[i].dead) return;
    auto d = numlin::singular_values(prepared[i].whitened);
    for (double& x : d) x *= x;
    sig2[i] = std::move(d);
  });
  double max_sig2 = 0.0;
  for (const auto& v : sig2)
    for (double x : v) max_sig2 = std::max(max_sig2, x);

  const double budget = s.total_budget_w();
  const double gamma = s.gamma;
  long long evals = 0;
  auto total_power = [&](double lam) {
    ++evals;
    const double level = 1.0 / lam;
    double p = 0.0;
    for (const auto& v : sig2)
      for (double x : v)
        if (x > 0.0) p += std::max(0.0, level - gamma / x);
    return p;
  };

  double lam = 0.0;
  bool converged = true;
  std::string message;
  if (max_sig2 <= 0.0) {
    lam = opts.lambda_floor;
    message = "every tone is dead";
  } else if (budget <= 0.0) {
    // Smallest price at which no mode is filled.
    lam = max_sig2 / gamma * (1.0 + 1e-12);
  } else {
    const double tol = opts.eps_power * budget;
    double lo = 0.0, hi = 0.0;
    const double lam0 = static_cast<double>(n_lines * std::max<std::size_t>(active_tone_count(prepared), 1)) / budget;
    bool slack = false;
    if (total_power(lam0) > budget) {
      lo = lam0;
      hi = 2.0 * lam0;
      while (total_power(hi) > budget) lo = hi, hi *= 2.0;
    } else {
      hi = lam0;
      lo = 0.5 * lam0;
      while (total_power(lo) < budget) {
        hi = lo;
        lo *= 0.5;
        if (lo < opts.lambda_floor) {
          slack = true;
          break;
        }
      }
    }
    if (slack) {
      lam = opts.lambda_floor;
    } else {
      lam = std::sqrt(lo * hi);
      int it = 0;
      for (; it < opts.max_bisect; ++it) {
        const double p = total_power(lam);
        if (std::abs(p - budget) <= tol) break;
        (p > budget ? lo : hi) = lam;
        lam = std::sqrt(lo * hi);
      }
      if (it == opts.max_bisect) {
        converged = false;
        message = "bisection cap reached";
      }
    }
  }

  // The closed form at the final price.
  Evaluator ev(s, opts);
  std::vector<double> lambda(n_lines, lam);
  Allocation a = assemble(s, ev, opts, "total", lambda, nullptr);
  a.diagnostics.evaluations = evals;
  a.diagnostics.iterations = static_cast<int>(evals);
  a.diagnostics.converged = converged;
  a.diagnostics.message = message;
  fill_residuals(s, opts, a, true);
  return a;
}

namespace {

Allocation run_per_modem(const Scenario& s, const SolverOptions& opts, Evaluator& ev, std::string name) {
  std::vector<double> lambda = initial_lambdas(s, active_tone_count(ev.tones()));
  ev.evaluate(lambda, nullptr);
  bool converged = false;
  int outer = 0;
  for (; outer < opts.max_outer; ++outer) {
    sweep_lambdas(ev, s, opts, lambda, nullptr);
    bool all = true;
    for (std::size_t n = 0; n < s.n_lines; ++n) all = all && line_done(ev.powers()[n], s.p_tot_w[n], lambda[n], opts);
    if (all) {
      converged = true;
      ++outer;
      break;
    }
  }
  Allocation a = assemble(s, ev, opts, std::move(name), lambda, nullptr);
  a.diagnostics.iterations = outer;
  a.diagnostics.evaluations = ev.evaluations();
  a.diagnostics.converged = converged;
  if (!converged) a.diagnostics.message = "outer iteration cap reached";
  fill_residuals(s, opts, a, false);
  return a;
}

}  // namespace

Allocation algo2_per_modem(const Scenario& s, const SolverOptions& opts) {
  opts.validate();
  Evaluator ev(s, opts);
  return run_per_modem(s, opts, ev, "per-modem");
}

namespace {

// Adjusts the mask prices kappa[.][i] of one tone until every masked line
// either sits on its mask (kappa > lambda) or is under it with kappa
// inactive. Writes the tone's final powers into phi_i. Returns false when
// the pass cap is reached.
bool fix_tone_masks(const Scenario& s, const SolverOptions& opts, const PreparedTone& pt, std::size_t i,
                    const std::vector<double>& lambda, std::vector<std::vector<double>>& kappa, std::span<double> phi_i,
                    double& b_i) {
  const std::size_t n_lines = s.n_lines;
  std::vector<double> prices(n_lines);
  auto eval = [&]() {
    for (std::size_t n = 0; n < n_lines; ++n)
      prices[n] = std::max({lambda[n], kappa[n][i], opts.lambda_floor});
    b_i = kernels::tone_power_kernel(pt, prices, s.gamma, phi_i);
  };
  eval();
  constexpr int kPasses = 32;
  for (int pass = 0; pass < kPasses; ++pass) {
    bool changed = false;
    for (std::size_t n = 0; n < n_lines; ++n) {
      const double m = s.mask_w[n][i];
      if (m == binder::kInf) continue;
      const double lam_n = std::max(lambda[n], opts.lambda_floor);
      if (!std::isfinite(lam_n)) continue;
      const bool active = kappa[n][i] > lam_n;
      const double phi = phi_i[n];
      if (active ? std::abs(phi - m) <= opts.eps_mask * m : phi <= m * (1.0 + opts.eps_mask)) continue;
      changed = true;
      auto g = [&](double u) {
        kappa[n][i] = 1.0 / u;
        eval();
        return phi_i[n];
      };
      const double u0 = 1.0 / std::max(kappa[n][i], lam_n);
      const RootResult r = solve_increasing(g, u0, phi, m, 0.5 * opts.eps_mask * m, 1.0 / lam_n, 200);
      if (r.at_cap) {
        kappa[n][i] = 0.0;
        eval();
      } else {
        kappa[n][i] = 1.0 / r.u;
      }
    }
    if (!changed) return true;
  }
  return false;
}

}  // namespace

Allocation algo3_per_modem_mask(const Scenario& s, const SolverOptions& opts) {
  opts.validate();
  const std::size_t n_lines = s.n_lines;
  const std::size_t n_tones = s.n_tones();
  Evaluator ev(s, opts);
  for (std::size_t n = 0; n < n_lines; ++n)
    for (std::size_t i = 0; i < n_tones; ++i)
      if (!ev.tones()[i].dead && s.mask_w[n][i] <= 0.0) {
        throw InfeasibleMask("mask is not positive on active tone " + std::to_string(s.tones[i].index) + " of line " +
                             std::to_string(n));
      }

  std::vector<double> lambda = initial_lambdas(s, active_tone_count(ev.tones()));
  std::vector<std::vector<double>> kappa(n_lines, std::vector<double>(n_tones, 0.0));
  ev.evaluate(lambda, &kappa);

  bool converged = false;
  bool masks_ok = false;
  int outer = 0;
  std::vector<char> tone_ok(n_tones, 1);
  for (; outer < opts.max_outer; ++outer) {
    sweep_lambdas(ev, s, opts, lambda, &kappa);
    kernels::for_each_tone(n_tones, opts.execution, [&](std::size_t i) {
      if (ev.tones()[i].dead) return;
      tone_ok[i] = fix_tone_masks(s, opts, ev.tones()[i], i, lambda, kappa,
                                  std::span<double>(ev.phi().data() + i * n_lines, n_lines), ev.b()[i]) ? 1 : 0;
    });
    ev.refresh_powers();
    masks_ok = std::all_of(tone_ok.begin(), tone_ok.end(), [](char c) { return c != 0; });
    bool all = masks_ok;
    for (std::size_t n = 0; n < n_lines; ++n) all = all && line_done(ev.powers()[n], s.p_tot_w[n], lambda[n], opts);
    if (all) {
      converged = true;
      ++outer;
      break;
    }
  }

  Allocation a = assemble(s, ev, opts, "per-modem-mask", lambda, &kappa);
  a.diagnostics.iterations = outer;
  a.diagnostics.evaluations = ev.evaluations();
  a.diagnostics.converged = converged;
  if (!converged) a.diagnostics.message = masks_ok ? "outer iteration cap reached" : "mask prices did not settle";
  fill_residuals(s, opts, a, false);
  return a;
}

Allocation truncation_baseline(const Scenario& s, const SolverOptions& opts) {
  opts.validate();
  const std::size_t n_lines = s.n_lines;
  const std::size_t n_tones = s.n_tones();
  Evaluator ev(s, opts);
  Allocation base = run_per_modem(s, opts, ev, "truncation");

  Allocation a = base;
  a.multipliers.mu.assign(n_lines, std::vector<double>(n_tones, 0.0));
  kernels::for_each_tone(n_tones, opts.execution, [&](std::size_t i) {
    std::vector<double> scale(n_lines, 1.0);
    bool clipped = false;
    for (std::size_t n = 0; n < n_lines; ++n) {
      const double phi = base.cov[i](n, n).real();
      const double m = s.mask_w[n][i];
      if (m != binder::kInf && phi > m) {
        scale[n] = m > 0.0 ? std::sqrt(m / phi) : 0.0;
        clipped = true;
      }
    }
    if (!clipped) return;
    CMatrix c = numlin::scale_rows(numlin::scale_columns(base.cov[i].matrix(), scale), scale);
    a.cov[i] = HermitianPSD::from_lower_unchecked(c);
    // Diagonal entries of the clipped covariance are set exactly.
    const double b_new = rate_of_cov(ev.tones()[i], a.cov[i].matrix(), s.gamma);
    const double b_old = base.b_nats[i];
    a.b_nats[i] = b_new;
    for (std::size_t n = 0; n < n_lines; ++n)
      a.line_b_nats[n][i] = b_old > 0.0 ? base.line_b_nats[n][i] * (b_new / b_old) : 0.0;
  });
  finish_allocation(s, a);
  fill_residuals(s, opts, a, false);
  return a;
}

Allocation solve(const Scenario& s, const SolverOptions& opts) {
  switch (s.mode) {
    case binder::ConstraintMode::total:
      return algo1_total_power(s, opts);
    case binder::ConstraintMode::per_modem:
      return algo2_per_modem(s, opts);
    case binder::ConstraintMode::per_modem_mask:
      return algo3_per_modem_mask(s, opts);
  }
  throw InvalidInput("unknown constraint mode");
}

}  // namespace dsmopt::spectra
