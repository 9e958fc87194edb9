// Serial reference loop vs OpenMP tone loop on the default binder.
//   bench_tone_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "dsmopt/harness.hpp"
#include "dsmopt/spectra.hpp"
#include "dsmopt/tone_kernels.hpp"

using namespace dsmopt;
using Clock = std::chrono::steady_clock;

namespace {

template <class Fn>
double best_of(int repeats, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
  kernels::set_worker_count(kernels::threads_from_env());
  const binder::Scenario s = harness::default_scenario();
  const std::vector<double> lam(s.n_lines, 1e3);
  std::printf("%zu lines, %zu tones, %d workers\n", s.n_lines, s.n_tones(), kernels::worker_count());

  for (auto exec : {kernels::Execution::serial, kernels::Execution::parallel}) {
    const char* name = exec == kernels::Execution::serial ? "serial" : "parallel";
    std::vector<kernels::PreparedTone> prepared;
    const double t_prep = best_of(repeats, [&] { prepared = kernels::prepare_tones(s, exec); });
    std::vector<double> phi, b;
    const double t_eval = best_of(repeats, [&] {
      kernels::evaluate_tones(prepared, s.n_lines, s.gamma, [&](std::size_t, std::size_t n) { return lam[n]; }, exec,
                              phi, b);
    });
    spectra::SolverOptions opts;
    opts.execution = exec;
    double rate = 0.0;
    const double t_algo2 = best_of(1, [&] { rate = spectra::algo2_per_modem(s, opts).sum_rate; });
    std::printf("%-8s prepare %8.4f s  sweep %8.4f s  algo2 %7.3f s  (%.4f Mbps)\n", name, t_prep, t_eval, t_algo2,
                rate / 1e6);
  }
  return 0;
}
