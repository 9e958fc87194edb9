#pragma once

// Optimal transmit spectra for a fully coordinated binder by dual
// decomposition. For fixed per-line prices the Lagrangian separates over
// tones, and each tone is solved in closed form: whiten the noise, scale the
// channel by the inverse square-root prices, take its SVD and waterfill the
// singular modes at unit water level. The searches below adjust the prices
// until power budgets (and spectral masks) are met.
//
// Rates are in nats internally so that the water level is exactly 1 when
// prices are expressed in nats/W; reports convert to bit/s.

#include <cstddef>
#include <string>
#include <vector>

#include "dsmopt/binder.hpp"
#include "dsmopt/numlin.hpp"
#include "dsmopt/tone_kernels.hpp"

namespace dsmopt::spectra {

using binder::Scenario;
using binder::ToneChannel;
using numlin::CMatrix;
using numlin::HermitianPSD;
using numlin::SvdFactors;

struct SolverOptions {
  double eps_power = 1e-10;  // relative budget tolerance
  double eps_mask = 1e-9;    // relative mask tolerance
  double lambda_floor = 1e-12;
  int max_outer = 200;
  int max_bisect = 200;
  double kkt_tol = 1e-6;
  kernels::Execution execution = kernels::Execution::parallel;

  void validate() const;
};

// Dual variables: lambda[n] prices line n's total power, mu[n][i] prices
// line n's mask on tone i.
struct Multipliers {
  std::vector<double> lambda;
  std::vector<std::vector<double>> mu;

  static Multipliers zeros(std::size_t n_lines, std::size_t n_tones);
  // diag(Lambda_i) = max(lambda_n + mu_{n,i}, floor).
  std::vector<double> tone_prices(std::size_t tone, double floor) const;
};

struct ToneSolution {
  SvdFactors factors;            // of L^{-1} H Lambda^{-1/2}
  std::vector<double> s_tilde;   // stream powers in scaled coordinates
  HermitianPSD Phi;              // transmit covariance
  std::vector<double> phi_diag;  // per-line powers on this tone
  double b_nats = 0.0;
};

struct Diagnostics {
  int iterations = 0;
  long long evaluations = 0;  // full-binder tone sweeps
  bool converged = false;
  double power_residual = 0.0;  // max relative budget miss over non-slack lines
  double mask_residual = 0.0;   // max relative mask violation
  std::size_t skipped_tones = 0;
  std::string message;
};

struct Allocation {
  std::string algorithm;
  Multipliers multipliers;
  std::vector<HermitianPSD> cov;               // Phi_i per tone
  std::vector<std::vector<double>> psd;        // [line][tone], W per tone
  std::vector<std::vector<double>> line_b_nats;  // [line][tone], stream-to-line attribution
  std::vector<double> b_nats;                  // per tone
  std::vector<double> rates_per_line;          // bit/s
  double sum_rate = 0.0;                       // bit/s
  std::vector<double> per_modem_power;         // W
  Diagnostics diagnostics;
};

// Closed-form per-tone solution at prices lam (all > 0).
ToneSolution tone_solve(const ToneChannel& tc, std::span<const double> lam, double gamma);
ToneSolution tone_solve(const kernels::PreparedTone& pt, std::span<const double> lam, double gamma);

// ln det(I + (1/gamma) L^{-1} H Phi H^H L^{-H}).
double rate_of_cov(const ToneChannel& tc, const HermitianPSD& phi, double gamma);
double rate_of_cov(const kernels::PreparedTone& pt, const CMatrix& phi, double gamma);

// Single total budget sum_n P_n: one price for all lines, bracketed and
// bisected.
Allocation algo1_total_power(const Scenario& s, const SolverOptions& opts = {});
// Per-modem budgets: cyclic coordinate search over the line prices.
Allocation algo2_per_modem(const Scenario& s, const SolverOptions& opts = {});
// Per-modem budgets plus per-tone spectral masks.
Allocation algo3_per_modem_mask(const Scenario& s, const SolverOptions& opts = {});
// Per-modem optimum with masks ignored, then clipped to the mask.
Allocation truncation_baseline(const Scenario& s, const SolverOptions& opts = {});

// Dispatch on the scenario's constraint mode (algo1/2/3).
Allocation solve(const Scenario& s, const SolverOptions& opts = {});

// Lagrange dual function at m.
double dual_value(const Scenario& s, const Multipliers& m, const SolverOptions& opts = {});

// Recomputes per-line powers, rates and the sum rate of `a` from a.cov and
// a.line_b_nats / a.b_nats.
void finish_allocation(const Scenario& s, Allocation& a);

// Zero allocation with the given multipliers (used for degenerate inputs).
Allocation zero_allocation(const Scenario& s, std::string algorithm, Multipliers m);

struct AuditReport {
  double power_violation = 0.0;  // max_n (P_n - P_n^tot)_+ / P_n^tot
  double mask_violation = 0.0;   // max_{n,i} (phi - mask)_+ / mask
  double psd_violation = 0.0;    // max_i most negative eigenvalue of Phi_i / (trace + scale)
  double feasibility = 0.0;      // max of the three above
  double dual_feasibility = 0.0;  // (-min multiplier)_+
  double comp_slack = 0.0;
  double stationarity = 0.0;
  double duality_gap = 0.0;  // (dual - primal) / (1 + |primal|)
  bool converged = false;

  bool pass(double tol) const;
};

AuditReport kkt_audit(const Scenario& s, const Allocation& a, const SolverOptions& opts = {});

}  // namespace dsmopt::spectra
