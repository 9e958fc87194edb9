#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsmopt::oracle {

Mat to_eigen(const numlin::CMatrix& a) {
  Mat m(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(r, c);
  return m;
}

numlin::CMatrix from_eigen(const Mat& a) {
  numlin::CMatrix m(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = a(r, c);
  return m;
}

std::vector<double> singular_values(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a.adjoint() * a, Eigen::EigenvaluesOnly);
  std::vector<double> d;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) d.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(k))));
  std::sort(d.rbegin(), d.rend());
  return d;
}

double logdet_rate(const Mat& h, const Mat& r, const Mat& phi, double gamma) {
  const Eigen::Index n = h.rows();
  const Mat m = Mat::Identity(n, n) + r.partialPivLu().solve(h * phi * h.adjoint()) / gamma;
  return std::log(std::abs(m.partialPivLu().determinant()));
}

ScalarWaterfill scalar_waterfill(const std::vector<double>& gain, double budget) {
  ScalarWaterfill out;
  out.s.assign(gain.size(), 0.0);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < gain.size(); ++i)
    if (gain[i] > 0.0) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gain[a] > gain[b]; });
  if (order.empty() || budget <= 0.0) return out;
  double inv_sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    inv_sum += 1.0 / gain[order[k]];
    const double w = (budget + inv_sum) / static_cast<double>(k + 1);
    const bool last = k + 1 == order.size();
    if (last || w <= 1.0 / gain[order[k + 1]]) {
      out.level = w;
      break;
    }
  }
  out.lambda = 1.0 / out.level;
  for (std::size_t i = 0; i < gain.size(); ++i) {
    if (gain[i] > 0.0) out.s[i] = std::max(0.0, out.level - 1.0 / gain[i]);
    out.rate_nats += std::log1p(gain[i] * out.s[i]);
  }
  return out;
}

std::vector<double> zf_noise(const Mat& h, const Mat& r) {
  const Mat g = h.adjoint() * r.inverse() * h;
  const Mat inv = g.inverse();
  std::vector<double> nu;
  for (Eigen::Index k = 0; k < inv.rows(); ++k) nu.push_back(inv(k, k).real());
  return nu;
}

namespace {

Mat psd_part(const Mat& x) {
  const Mat herm = 0.5 * (x + x.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(herm);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cast<std::complex<double>>().asDiagonal() * es.eigenvectors().adjoint();
}

// Euclidean projection of the tuple x onto {PSD per tone} ∩ {per-line sums
// of diagonals <= budget}.
std::vector<Mat> project(const std::vector<Mat>& x, const std::vector<double>& budget) {
  const std::size_t nt = x.size();
  const Eigen::Index n = x[0].rows();
  std::vector<Mat> y = x, p(nt), q(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    p[i] = Mat::Zero(n, n);
    q[i] = Mat::Zero(n, n);
  }
  for (int it = 0; it < 100000; ++it) {
    // Power halfspaces (disjoint groups: line n's diagonal over tones).
    std::vector<Mat> z(nt);
    for (std::size_t i = 0; i < nt; ++i) z[i] = y[i] + p[i];
    std::vector<Mat> zz = z;
    for (Eigen::Index l = 0; l < n; ++l) {
      double sum = 0.0;
      for (std::size_t i = 0; i < nt; ++i) sum += z[i](l, l).real();
      const double excess = sum - budget[static_cast<std::size_t>(l)];
      if (excess > 0.0)
        for (std::size_t i = 0; i < nt; ++i) zz[i](l, l) -= excess / static_cast<double>(nt);
    }
    for (std::size_t i = 0; i < nt; ++i) p[i] = z[i] - zz[i];
    // PSD cone.
    double change = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      const Mat w = zz[i] + q[i];
      const Mat next = psd_part(w);
      q[i] = w - next;
      change += (next - y[i]).squaredNorm();
      y[i] = next;
    }
    if (change < 1e-30) break;
  }
  return y;
}

}  // namespace

PgResult projected_gradient(const std::vector<Mat>& h, const std::vector<Mat>& r, const std::vector<double>& budget,
                            double gamma, double tol, int max_iter) {
  const std::size_t nt = h.size();
  const Eigen::Index n = h[0].rows();
  // Whitened channels and a step from the gradient's Lipschitz bound.
  std::vector<Mat> hw(nt);
  double lip = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    Eigen::LLT<Mat> llt(r[i]);
    hw[i] = llt.matrixL().solve(h[i]);
    const double s = singular_values(hw[i])[0];
    lip = std::max(lip, s * s * s * s / (gamma * gamma));
  }
  const double step = 1.0 / std::max(lip, 1e-300);

  auto gradient = [&](const std::vector<Mat>& phi) {
    std::vector<Mat> g(nt);
    for (std::size_t i = 0; i < nt; ++i) {
      const Mat m = gamma * Mat::Identity(n, n) + hw[i] * phi[i] * hw[i].adjoint();
      g[i] = hw[i].adjoint() * m.partialPivLu().solve(hw[i]);
      g[i] = 0.5 * (g[i] + g[i].adjoint());
    }
    return g;
  };

  PgResult res;
  res.phi.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    res.phi[i] = Mat::Zero(n, n);
    for (Eigen::Index l = 0; l < n; ++l) res.phi[i](l, l) = budget[static_cast<std::size_t>(l)] / static_cast<double>(nt);
  }
  for (int it = 0; it < max_iter; ++it) {
    const auto g = gradient(res.phi);
    std::vector<Mat> trial(nt);
    for (std::size_t i = 0; i < nt; ++i) trial[i] = res.phi[i] + step * g[i];
    auto next = project(trial, budget);
    double diff = 0.0;
    for (std::size_t i = 0; i < nt; ++i) diff += (next[i] - res.phi[i]).squaredNorm();
    res.phi = std::move(next);
    res.iterations = it + 1;
    res.stationarity = std::sqrt(diff) / step;
    if (res.stationarity <= tol) break;
  }
  res.sum_rate_nats = 0.0;
  for (std::size_t i = 0; i < nt; ++i) res.sum_rate_nats += logdet_rate(h[i], r[i], res.phi[i], gamma);
  return res;
}

Mat random_complex(SeededStream& st, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = st.complex_normal(1.0);
  return m;
}

Mat random_covariance(SeededStream& st, Eigen::Index n, Eigen::Index rank, double sigma2, double scale) {
  Mat r = sigma2 * Mat::Identity(n, n);
  if (rank > 0) {
    const Mat g = random_complex(st, n, rank);
    r += scale * g * g.adjoint();
  }
  return 0.5 * (r + r.adjoint());
}

}  // namespace dsmopt::oracle
