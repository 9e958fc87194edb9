#include "dsmopt/tone_kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dsmopt::kernels {

int threads_from_env() {
  const char* v = std::getenv("DSMOPT_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n <= 0 || n > 4096) return 0;
  return static_cast<int>(n);
}

void set_worker_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

PreparedTone prepare_tone(const binder::ToneChannel& tc) {
  PreparedTone pt;
  pt.chol = numlin::cholesky(tc.R);
  pt.dead = tc.dead();
  pt.whitened = numlin::solve_lower(pt.chol, tc.H);
  return pt;
}

std::vector<PreparedTone> prepare_tones(const binder::Scenario& s, Execution exec) {
  std::vector<PreparedTone> out(s.tones.size());
  for_each_tone(s.tones.size(), exec, [&](std::size_t i) { out[i] = prepare_tone(s.tones[i]); });
  return out;
}

double tone_power_kernel(const PreparedTone& pt, std::span<const double> lam, double gamma, std::span<double> phi) {
  const std::size_t n = lam.size();
  std::vector<double> inv_sqrt(n);
  for (std::size_t k = 0; k < n; ++k) inv_sqrt[k] = 1.0 / std::sqrt(lam[k]);
  const auto rs = numlin::right_singular(numlin::scale_columns(pt.whitened, inv_sqrt));

  double b = 0.0;
  for (std::size_t k = 0; k < n; ++k) phi[k] = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d2 = rs.d[j] * rs.d[j];
    if (!(d2 > gamma)) continue;
    const double s = 1.0 - gamma / d2;
    b += std::log1p(s * d2 / gamma);
    for (std::size_t k = 0; k < n; ++k) phi[k] += std::norm(rs.V(k, j)) * s;
  }
  for (std::size_t k = 0; k < n; ++k) phi[k] *= inv_sqrt[k] * inv_sqrt[k];
  return b;
}

std::vector<double> line_powers(const std::vector<double>& phi, std::size_t n_lines) {
  std::vector<double> p(n_lines, 0.0);
  const std::size_t n_tones = n_lines ? phi.size() / n_lines : 0;
  for (std::size_t i = 0; i < n_tones; ++i)
    for (std::size_t n = 0; n < n_lines; ++n) p[n] += phi[i * n_lines + n];
  return p;
}

}  // namespace dsmopt::kernels
