#pragma once

// Test-side reference computations. None of these call into the library's
// analytic routines; they only share the plain data types.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Mat zeros(std::size_t n, std::size_t m) { return Mat(n, Vec(m, 0.0)); }

inline Mat identity(std::size_t n) {
  Mat a = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
  return a;
}

inline Mat mul(const Mat& a, const Mat& b) {
  Mat c = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat add(const Mat& a, const Mat& b, double sb = 1.0) {
  Mat c = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) c[i][j] += sb * b[i][j];
  return c;
}

// Gauss-Jordan with full pivoting; returns x with a x = b.
inline Vec solve(Mat a, Vec b) {
  const std::size_t n = a.size();
  std::vector<std::size_t> col(n);
  for (std::size_t i = 0; i < n; ++i) col[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pr = k, pc = k;
    for (std::size_t i = k; i < n; ++i)
      for (std::size_t j = k; j < n; ++j)
        if (std::abs(a[i][j]) > std::abs(a[pr][pc])) pr = i, pc = j;
    if (a[pr][pc] == 0.0) throw std::runtime_error("oracle: singular system");
    std::swap(a[k], a[pr]);
    std::swap(b[k], b[pr]);
    for (auto& row : a) std::swap(row[k], row[pc]);
    std::swap(col[k], col[pc]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double f = a[i][k] / a[k][k];
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  Vec x(n);
  for (std::size_t k = 0; k < n; ++k) x[col[k]] = b[k] / a[k][k];
  return x;
}

// Birth-death chain on 0..K with constant rates; product form.
inline Vec mm1k_stationary(double lambda, double mu, int K) {
  Vec p(K + 1);
  p[0] = 1.0;
  for (int i = 1; i <= K; ++i) p[i] = p[i - 1] * lambda / mu;
  double s = 0.0;
  for (double x : p) s += x;
  for (double& x : p) x /= s;
  return p;
}

inline Mat mm1k_generator(double lambda, double mu, int K) {
  Mat q = zeros(K + 1, K + 1);
  for (int i = 0; i <= K; ++i) {
    if (i < K) q[i][i + 1] = lambda;
    if (i > 0) q[i][i - 1] = mu;
    q[i][i] = -((i < K ? lambda : 0.0) + (i > 0 ? mu : 0.0));
  }
  return q;
}

// Mean first entrance times into `to` for a generator q, by first-step
// analysis: sum_k q_ik m_k = -1 for i != to, m_to = 0.
inline Vec hitting_times(const Mat& q, std::size_t to) {
  const std::size_t n = q.size();
  Mat a = zeros(n, n);
  Vec b(n, -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == to) {
      a[i][i] = 1.0;
      b[i] = 0.0;
      continue;
    }
    for (std::size_t k = 0; k < n; ++k) a[i][k] = q[i][k];
  }
  return solve(a, b);
}

// e^{Qt} by scaling and squaring of a Taylor series.
inline Mat expm(const Mat& q, double t) {
  const std::size_t n = q.size();
  double norm = 0.0;
  for (const auto& row : q) {
    double s = 0.0;
    for (double x : row) s += std::abs(x);
    norm = std::max(norm, s);
  }
  int squarings = 0;
  double scale = t;
  while (norm * scale > 0.25) {
    scale /= 2.0;
    ++squarings;
  }
  Mat a = q;
  for (auto& row : a)
    for (double& x : row) x *= scale;
  Mat result = identity(n), term = identity(n);
  for (int k = 1; k <= 20; ++k) {
    term = mul(term, a);
    for (auto& row : term)
      for (double& x : row) x /= k;
    result = add(result, term);
  }
  for (int s = 0; s < squarings; ++s) result = mul(result, result);
  return result;
}

// int_0^T (e^{Qu} - 1 pi) du by composite Simpson on [0, T].
inline Mat deviation_by_quadrature(const Mat& q, const Vec& pi, double T, int panels) {
  const std::size_t n = q.size();
  const double h = T / panels;
  const Mat step = expm(q, h);
  Mat e = identity(n);
  Mat acc = zeros(n, n);
  for (int k = 0; k <= panels; ++k) {
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) acc[i][j] += w * (e[i][j] - pi[j]);
    e = mul(e, step);
  }
  for (auto& row : acc)
    for (double& x : row) x *= h / 3.0;
  return acc;
}

// Poisson(m) pmf on 0..n_max, computed in log space.
inline Vec poisson_pmf(double m, std::size_t n_max) {
  Vec p(n_max + 1);
  for (std::size_t k = 0; k <= n_max; ++k) {
    p[k] = std::exp(-m + k * std::log(m) - std::lgamma(double(k) + 1.0));
  }
  return p;
}

// Renewal process with Erlang(k) gaps of mean 1: phase completions form a
// Poisson process of rate k, so N(t) = floor((P + U) / k) with P ~ Poisson(k t)
// and U the number of phases already completed at time 0 (U = 0 for the
// ordinary process, uniform on 0..k-1 for the equilibrium one).
inline double erlang_renewal_variance(int k, double t, bool equilibrium) {
  const double m = k * t;
  const std::size_t n_max = static_cast<std::size_t>(m + 40.0 * std::sqrt(m) + 50.0);
  const Vec p = poisson_pmf(m, n_max);
  double s1 = 0.0, s2 = 0.0;
  const int u_count = equilibrium ? k : 1;
  for (int u = 0; u < u_count; ++u) {
    for (std::size_t j = 0; j <= n_max; ++j) {
      const double n = std::floor(double(j + u) / k);
      s1 += p[j] * n / u_count;
      s2 += p[j] * n * n / u_count;
    }
  }
  return s2 - s1 * s1;
}

// Derivatives at z = 1 of an analytic f by the Cauchy integral on a circle
// of radius r around 1, with n trapezoid nodes.
inline std::vector<double> derivatives_at_one(const std::function<std::complex<double>(std::complex<double>)>& f,
                                              double r, int n, int order) {
  std::vector<double> d(order + 1, 0.0);
  const double pi = std::acos(-1.0);
  for (int j = 0; j < n; ++j) {
    const std::complex<double> w = std::polar(1.0, 2.0 * pi * (j + 0.5) / n);
    const std::complex<double> fz = f(1.0 + r * w);
    double fact = 1.0;
    for (int m = 0; m <= order; ++m) {
      if (m > 0) fact *= m;
      d[m] += (fz * std::pow(w, -m)).real() * fact / std::pow(r, m) / n;
    }
  }
  return d;
}

// Variance of the stationary M/G/1 queue length from the
// Pollaczek-Khinchine PGF, differentiated numerically. `lst` is the
// service transform; `root` is the real zero > 1 of lst(lambda (1 - z)) - z.
inline double mg1_queue_variance(const std::function<std::complex<double>(std::complex<double>)>& lst,
                                 double lambda, double rho, double root) {
  auto pgf = [&](std::complex<double> z) {
    const std::complex<double> g = lst(lambda * (1.0 - z));
    return (1.0 - rho) * (1.0 - z) * g / (g - z);
  };
  const auto d = derivatives_at_one(pgf, 0.5 * (root - 1.0), 256, 2);
  return d[2] + d[1] - d[1] * d[1];
}

inline double pgf_root(const std::function<double(double)>& lst, double lambda, double z_max) {
  // g(z) = lst(lambda (1 - z)) - z vanishes at 1, dips below 0 (slope rho - 1)
  // and crosses back up at the root; bracket the crossing, then bisect.
  auto g = [&](double z) { return lst(lambda * (1.0 - z)) - z; };
  const double step = (z_max - 1.0) / 4000.0;
  double lo = 1.0 + step, hi = lo;
  for (;;) {
    hi = lo + step;
    const double v = g(hi);
    if (!std::isfinite(v) || v >= 0.0 || hi >= z_max) break;
    lo = hi;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double v = g(mid);
    if (std::isfinite(v) && v < 0.0) lo = mid; else hi = mid;
  }
  return lo;
}

}  // namespace oracle
