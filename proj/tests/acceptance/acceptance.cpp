#include "acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "dsmopt/binder.hpp"
#include "dsmopt/harness.hpp"
#include "dsmopt/report.hpp"
#include "dsmopt/spectra.hpp"
#include "dsmopt/structures.hpp"
#include "oracles/oracles.hpp"
#include "support/fixtures.hpp"

namespace dsmopt::acceptance {

namespace {

using binder::ConstraintMode;
using binder::Direction;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string sci(double x) { return fmt("%.3e", x); }

double rel_diff(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

// ---------------------------------------------------------------------------

Outcome ac1_determinant_identity() {
  const auto t0 = Clock::now();
  SeededStream st(derive_seed(2024, {1}));
  double worst = 0.0;
  int count = 0;
  for (std::size_t n : {1u, 2u, 4u, 8u})
    for (int k = 0; k < 50; ++k, ++count) {
      const auto tc = fixtures::random_tone(st, n, static_cast<std::size_t>(k));
      const auto lam = fixtures::random_prices(st, n);
      const double gamma = 1.0 + 9.0 * st.uniform();
      const auto sol = spectra::tone_solve(tc, lam, gamma);
      worst = std::max(worst, rel_diff(spectra::rate_of_cov(tc, sol.Phi, gamma), sol.b_nats));
    }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 5.0,
          std::to_string(count) + " tones, max relative |rate_of_cov - b_nats| = " + sci(worst) + " (tol 1e-9), " +
              fmt("%.2f s (limit 5 s)", t)};
}

Outcome ac2_analytic_waterfilling() {
  struct Case {
    std::vector<double> h2;
    double budget;
    double lambda;
    std::vector<double> s;
  };
  const std::vector<Case> cases{{{1.0, 1.0}, 2.0, 0.5, {1.0, 1.0}}, {{4.0, 1.0}, 0.75, 1.0, {0.75, 0.0}}};
  double dl = 0.0, ds = 0.0;
  for (const auto& c : cases) {
    const auto s = fixtures::scalar_scenario(c.h2, c.budget);
    const auto a = spectra::algo1_total_power(s);
    const auto o = oracle::scalar_waterfill(c.h2, s.p_tot_w[0]);
    dl = std::max({dl, std::abs(a.multipliers.lambda[0] - c.lambda), std::abs(a.multipliers.lambda[0] - o.lambda)});
    for (std::size_t i = 0; i < c.s.size(); ++i)
      ds = std::max({ds, std::abs(a.psd[0][i] - c.s[i]), std::abs(a.psd[0][i] - o.s[i])});
  }
  return {dl <= 1e-8 && ds <= 1e-8,
          "max |d lambda| = " + sci(dl) + ", max |d s| = " + sci(ds) + " (tol 1e-8) over 2 scalar cases"};
}

Outcome ac3_small_instance_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  double worst_stat = 0.0;
  std::vector<binder::Scenario> cases{fixtures::symmetric_pair(), fixtures::coupled_pair(11)};
  for (const auto& s : cases) {
    const auto a = spectra::algo2_per_modem(s);
    std::vector<oracle::Mat> h, r;
    for (const auto& t : s.tones) {
      h.push_back(oracle::to_eigen(t.H));
      r.push_back(oracle::to_eigen(t.R.matrix()));
    }
    const auto pg = oracle::projected_gradient(h, r, s.p_tot_w, s.gamma, 1e-8);
    double b = 0.0;
    for (double x : a.b_nats) b += x;
    worst = std::max(worst, rel_diff(b, pg.sum_rate_nats));
    worst_stat = std::max(worst_stat, pg.stationarity);
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-4 && worst_stat <= 1e-8 && t < 60.0,
          "N=2, N_c=2, 2 instances: max relative sum-rate gap to projected gradient = " + sci(worst) +
              " (tol 1e-4), oracle stationarity " + sci(worst_stat) + ", " + fmt("%.2f s (limit 60 s)", t)};
}

Outcome ac4_kkt_default() {
  const binder::Scenario base = harness::default_scenario();
  spectra::SolverOptions opts;
  bool ok = true;
  std::ostringstream os;
  os << base.n_tones() << " tones;";
  for (const char* algo : {"total", "per-modem", "per-modem-mask"}) {
    binder::Scenario s = base;
    const auto t0 = Clock::now();
    const auto a = harness::run_algorithm(s, algo, opts);
    const double t = seconds_since(t0);
    const auto r = spectra::kkt_audit(s, a, opts);
    const double worst = std::max({r.feasibility, r.dual_feasibility, r.comp_slack, r.stationarity});
    const bool pass = a.diagnostics.converged && r.pass(1e-6) && t <= 60.0;
    ok = ok && pass;
    os << ' ' << algo << ": max residual " << sci(worst) << fmt(", %.1f s", t) << (pass ? "" : " [fail]") << ';';
  }
  os << " (tol 1e-6, limit 60 s)";
  return {ok, os.str()};
}

Outcome ac5_reductions() {
  // Masks at +inf: algo3 must reproduce algo2.
  binder::Scenario s = harness::default_scenario();
  s.mask.mode = binder::MaskSpec::Mode::none;
  s.mask.per_line.clear();
  s.mode = ConstraintMode::per_modem_mask;
  s.finalize();
  const auto a3 = spectra::algo3_per_modem_mask(s);
  const auto a2 = spectra::algo2_per_modem(s);
  const double d1 = rel_diff(a3.sum_rate, a2.sum_rate);

  // Circulant symmetric binder with equal budgets: per-modem equals total.
  binder::Scenario c = fixtures::circulant_scenario(4, 64, 99, 0.5);
  const auto b2 = spectra::algo2_per_modem(c);
  c.mode = ConstraintMode::total;
  c.finalize();
  const auto b1 = spectra::algo1_total_power(c);
  const double d2 = rel_diff(b2.sum_rate, b1.sum_rate);
  return {d1 <= 1e-8 && d2 <= 1e-8, "algo3(mask=inf) vs algo2: " + sci(d1) + "; circulant algo2 vs algo1: " + sci(d2) +
                                        " (relative sum rate, tol 1e-8)"};
}

// Sweeps shared by AC6 and AC7.
struct SweepCache {
  std::vector<harness::SweepRow> down, up;
  bool ready = false;
};

SweepCache& sweeps() {
  static SweepCache cache;
  if (!cache.ready) {
    harness::ExperimentConfig cfg;
    cfg.gen = harness::default_gen_config(Direction::downstream);
    cfg.algos = {"per-modem", "per-modem-mask", "truncation", "dp"};
    cache.down = harness::run_sweep(cfg);
    cfg.gen = harness::default_gen_config(Direction::upstream);
    cfg.algos = {"per-modem", "per-modem-mask", "zf"};
    cache.up = harness::run_sweep(cfg);
    cache.ready = true;
  }
  return cache;
}

std::map<std::size_t, std::map<std::string, harness::SweepRow>> by_k(const std::vector<harness::SweepRow>& rows) {
  std::map<std::size_t, std::map<std::string, harness::SweepRow>> out;
  for (const auto& r : rows) out[r.k][r.algo] = r;
  return out;
}

Outcome ac6_dominance() {
  const auto& c = sweeps();
  bool ok = true;
  double min_dp = binder::kInf, min_zf = binder::kInf, min_tr = binder::kInf;
  std::size_t points = 0;
  for (const auto& [k, m] : by_k(c.down)) {
    for (const auto& [name, row] : m) ok = ok && row.status == "ok";
    const double dp = m.at("dp").sum_rate_mbps;
    const double tr = m.at("truncation").sum_rate_mbps;
    for (const char* two : {"per-modem", "per-modem-mask"}) min_dp = std::min(min_dp, m.at(two).sum_rate_mbps - dp);
    min_tr = std::min(min_tr, m.at("per-modem-mask").sum_rate_mbps - tr);
    ++points;
  }
  for (const auto& [k, m] : by_k(c.up)) {
    for (const auto& [name, row] : m) ok = ok && row.status == "ok";
    const double zf = m.at("zf").sum_rate_mbps;
    for (const char* two : {"per-modem", "per-modem-mask"}) min_zf = std::min(min_zf, m.at(two).sum_rate_mbps - zf);
    ++points;
  }
  // k = 1 is a single line where both sides reduce to the same waterfill, so allow rounding.
  constexpr double slack = 1e-6;
  ok = ok && min_dp >= -slack && min_zf >= -slack && min_tr >= -slack;
  return {ok, std::to_string(points) + " sweep points; min margins (Mbps): two-sided - DP = " + fmt("%.4f", min_dp) +
                  ", two-sided - ZF = " + fmt("%.4f", min_zf) + ", algo3 - truncation = " + fmt("%.4f", min_tr) +
                  " (all must be >= -1e-6)"};
}

Outcome ac7_sweep_trend() {
  const auto& c = sweeps();
  std::vector<double> avg;
  for (const auto& r : c.down)
    if (r.algo == "per-modem-mask") avg.push_back(r.avg_rate_mbps);
  bool ok = avg.size() == binder::Defaults::n_lines;
  std::ostringstream os;
  os << "avg per-line Mbps k=1..8:";
  for (std::size_t k = 0; k < avg.size(); ++k) {
    os << ' ' << fmt("%.2f", avg[k]);
    if (k > 0 && avg[k] < avg[k - 1]) ok = false;
  }
  os << " (must be non-decreasing)";
  return {ok, os.str()};
}

Outcome ac8_constants() {
  using D = binder::Defaults;
  const auto ds = binder::BandPlan::vdsl2_downstream();
  const auto us = binder::BandPlan::vdsl2_upstream();
  const harness::GenConfig g = harness::default_gen_config();
  const std::vector<binder::Band> ds_expect{{138e3, 3.75e6}, {5.2e6, 8.5e6}};
  const std::vector<binder::Band> us_expect{{25e3, 138e3}, {3.75e6, 5.2e6}, {8.5e6, 12e6}};
  const bool ok = D::awgn_dbm_hz == -140.0 && D::p_tot_dbm == 14.5 && D::delta_f_hz == 4312.5 &&
                  D::f_sym_hz == 4000.0 && D::f_max_hz == 12e6 && D::n_lines == 8 && D::loop_length_m == 800.0 &&
                  D::coupling_length_m == 400.0 && ds.bands == ds_expect && us.bands == us_expect &&
                  g.model.awgn_dbm_hz == -140.0 && g.p_tot_dbm == 14.5 && g.delta_f_hz == 4312.5 &&
                  g.n_lines == 8 && g.model.loop_length_m == 800.0 && g.model.coupling_length_m == 400.0 &&
                  g.f_max_hz == 12e6;
  return {ok, "AWGN -140 dBm/Hz, 14.5 dBm/line, 4312.5 Hz spacing, 4 kHz symbols, 12 MHz, 8 x 800 m, 400 m "
              "coupling, VDSL2 band plans (exact equality)"};
}

Outcome ac9_monte_carlo() {
  const binder::Scenario base = harness::default_scenario();
  binder::Scenario s = base;
  const auto a = harness::run_algorithm(s, "per-modem-mask", {});
  double dev = 0.0, snr = 0.0;
  int streams = 0;
  for (std::size_t i : {std::size_t{10}, s.n_tones() / 3, s.n_tones() / 2, s.n_tones() - 20}) {
    const auto prices = a.multipliers.tone_prices(i, spectra::SolverOptions{}.lambda_floor);
    const auto sol = spectra::tone_solve(s.tones[i], prices, s.gamma);
    const auto pair = structures::make_txrx(s.tones[i], prices, sol);
    const auto rep = structures::monte_carlo_siso(pair, s.tones[i], sol.s_tilde, 100000, derive_seed(9, {i}));
    dev = std::max(dev, rep.max_cov_deviation);
    snr = std::max(snr, rep.max_snr_rel_error);
    for (double e : rep.expected_snr) streams += e > 0.0 ? 1 : 0;
  }
  return {dev <= 0.05 && snr <= 0.05 && streams > 0,
          "1e5 draws on 4 tones (" + std::to_string(streams) + " active streams): max |cov(e) - I| = " + sci(dev) +
              " (tol 0.05), max SNR relative error = " + sci(snr) + " (tol 0.05)"};
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = report::read_text(e.path());
  return out;
}

Outcome ac10_determinism() {
  const auto root = std::filesystem::temp_directory_path() / ("dsmopt_ac10_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  harness::ExperimentConfig cfg;
  cfg.algos = {"per-modem-mask", "dp"};
  cfg.counts = {1, 3, 8};
  cfg.subsets = 2;
  cfg.seed = 5;
  const int before = kernels::worker_count();
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* threads : {"1", "4"}) {
    ::setenv("DSMOPT_THREADS", threads, 1);
    kernels::set_worker_count(kernels::threads_from_env());
    cfg.out_dir = root / threads;
    harness::run_sweep(cfg);
    trees.push_back(read_tree(*cfg.out_dir));
  }
  ::unsetenv("DSMOPT_THREADS");
  kernels::set_worker_count(before);
  std::filesystem::remove_all(root);
  const bool same = trees[0] == trees[1] && !trees[0].empty();
  return {same, std::to_string(trees[0].size()) + " output files compared byte-for-byte between DSMOPT_THREADS=1 and 4: " +
                    (same ? "identical" : "DIFFERENT")};
}

}  // namespace

std::vector<Criterion> criteria() {
  return {
      {1, "determinant identity", ac1_determinant_identity},
      {2, "analytic waterfilling", ac2_analytic_waterfilling},
      {3, "small-instance oracle", ac3_small_instance_oracle},
      {4, "KKT audit on default binder", ac4_kkt_default},
      {5, "reductions", ac5_reductions},
      {6, "dominance over baselines", ac6_dominance},
      {7, "sweep trend", ac7_sweep_trend},
      {8, "reference constants", ac8_constants},
      {9, "parallel-SISO Monte Carlo", ac9_monte_carlo},
      {10, "determinism", ac10_determinism},
  };
}

int run_all(std::ostream& out, int only) {
  int failures = 0;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    out << (o.pass ? "[PASS] " : "[FAIL] ") << "AC" << c.id << ' ' << c.name << ": " << o.detail << std::endl;
  }
  return failures;
}

}  // namespace dsmopt::acceptance
