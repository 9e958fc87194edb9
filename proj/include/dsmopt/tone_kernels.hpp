#pragma once

// Per-tone data-parallel kernels. Every multiplier search reduces to
// "evaluate all tones at the current prices, then sum per line"; the tone
// loop is embarrassingly parallel and runs under OpenMP. The serial loop is
// the reference implementation: both write results into per-tone slots and
// every reduction runs afterwards in tone-index order, so the two paths
// produce bit-identical numbers for any worker count.

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include "dsmopt/binder.hpp"
#include "dsmopt/numlin.hpp"

namespace dsmopt::kernels {

enum class Execution { serial, parallel };

// Worker-count hint from DSMOPT_THREADS (0 when unset or invalid).
int threads_from_env();
// Applies a worker-count hint to the OpenMP runtime (n <= 0 leaves the default).
void set_worker_count(int n);
int worker_count();

// Runs fn(i) for i in [0, count). Exceptions thrown by fn are rethrown
// after the loop; the one from the lowest index wins in both modes.
template <class Fn>
void for_each_tone(std::size_t count, Execution exec, Fn&& fn) {
  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  bool any = false;
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 8) reduction(|| : any)
  for (long long i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
      any = true;
    }
  }
  if (any) {
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
}

// Multiplier-independent part of a tone: the noise Cholesky factor and the
// whitened channel L^{-1} H.
struct PreparedTone {
  numlin::CMatrix chol;
  numlin::CMatrix whitened;
  bool dead = false;
};

PreparedTone prepare_tone(const binder::ToneChannel& tc);
std::vector<PreparedTone> prepare_tones(const binder::Scenario& s, Execution exec);

// Diagonal of Phi and the tone rate at prices lam (all > 0). `phi` has one
// slot per line. This is the inner kernel of every search.
double tone_power_kernel(const PreparedTone& pt, std::span<const double> lam, double gamma, std::span<double> phi);

// Evaluates all tones. Price of line n on tone i is price(i, n); results go
// to phi[i * N + n] and b[i].
template <class PriceFn>
void evaluate_tones(std::span<const PreparedTone> tones, std::size_t n_lines, double gamma, PriceFn&& price,
                    Execution exec, std::vector<double>& phi, std::vector<double>& b) {
  phi.assign(tones.size() * n_lines, 0.0);
  b.assign(tones.size(), 0.0);
  for_each_tone(tones.size(), exec, [&](std::size_t i) {
    if (tones[i].dead) return;
    std::vector<double> lam(n_lines);
    for (std::size_t n = 0; n < n_lines; ++n) lam[n] = price(i, n);
    b[i] = tone_power_kernel(tones[i], lam, gamma, std::span<double>(phi.data() + i * n_lines, n_lines));
  });
}

// Per-line sums of phi in tone-index order.
std::vector<double> line_powers(const std::vector<double>& phi, std::size_t n_lines);

}  // namespace dsmopt::kernels
