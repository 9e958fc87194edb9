#pragma once

// Transceiver matrices implied by a per-tone solution, a Monte Carlo check
// of the resulting parallel scalar channels, and the two one-sided linear
// baselines: the diagonalizing precoder (downstream) and the zero-forcing
// receiver (upstream).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dsmopt/binder.hpp"
#include "dsmopt/numlin.hpp"
#include "dsmopt/spectra.hpp"

namespace dsmopt::structures {

using binder::Scenario;
using binder::ToneChannel;
using numlin::CMatrix;

struct TxRxPair {
  CMatrix tx;  // Lambda^{-1/2} V: stream symbols to line signals
  CMatrix rx;  // U^H L^{-1}: received signals to whitened streams
  std::vector<double> d;
};

// `sol` must come from tone_solve(tc, lam, gamma).
TxRxPair make_txrx(const ToneChannel& tc, std::span<const double> lam, const spectra::ToneSolution& sol);

struct SisoReport {
  std::size_t n_draws = 0;
  CMatrix error_cov;                // empirical cov(z - D x)
  double max_cov_deviation = 0.0;   // max entry of |error_cov - I|
  std::vector<double> empirical_snr;  // mean |d x|^2 / mean |e|^2 per stream
  std::vector<double> expected_snr;   // s_tilde * d^2
  double max_snr_rel_error = 0.0;     // over streams with expected_snr > 0
};

// Draws Gaussian stream symbols with powers s_tilde and noise with
// covariance R, passes them through tx, H and rx, and compares the
// per-stream error with the unit-variance prediction. Deterministic in seed.
SisoReport monte_carlo_siso(const TxRxPair& pair, const ToneChannel& tc, std::span<const double> s_tilde,
                            std::size_t n_draws, std::uint64_t seed);

// Capped scalar waterfilling: s_i = clamp(w - 1/g_i, 0, cap_i) with the
// level w chosen so that sum s = budget (or every tone at its cap when the
// caps sum below the budget). Tones with g_i <= 0 get nothing.
struct ScalarWaterfill {
  std::vector<double> s;
  double level = 0.0;  // w; 0 when nothing is allocated
  bool slack = false;  // caps bind before the budget
};
ScalarWaterfill capped_waterfill(std::span<const double> gain, std::span<const double> cap, double budget);

// Downstream baseline: precoder F = H^{-1} diag(H) per tone, per-line
// waterfilling on |H_nn|^2 / (gamma R_nn), then back-off so the precoder
// output meets masks and budgets. Singular tones carry zero rate.
spectra::Allocation dp_baseline(const Scenario& s, const spectra::SolverOptions& opts = {});

// Upstream baseline: ZF receiver with post-detection noise
// nu_n = [(H^H R^{-1} H)^{-1}]_nn and per-line waterfilling on 1 / (gamma nu).
// Rank-deficient tones carry zero rate.
spectra::Allocation zf_baseline(const Scenario& s, const spectra::SolverOptions& opts = {});

// Post-detection noise of the ZF receiver on one tone. Throws RankDeficient.
std::vector<double> zf_noise(const ToneChannel& tc);

// Precoder F = H^{-1} diag(H). Throws SingularChannel.
CMatrix dp_precoder(const ToneChannel& tc);

}  // namespace dsmopt::structures
