#pragma once

// Independent reference implementations and input generators for the tests.
// Nothing here calls into the library's numeric kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "gmu/gmm.hpp"
#include "gmu/linalg.hpp"

namespace oracle {

using Dense = std::vector<std::vector<long double>>;

inline Dense to_dense(const gmu::Matrix& m) {
  Dense a(m.rows(), std::vector<long double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) a[i][j] = m(i, j);
  return a;
}

// Gauss-Jordan with partial pivoting; returns the inverse and writes log|det|.
inline Dense invert(Dense a, long double* log_abs_det = nullptr) {
  const std::size_t n = a.size();
  Dense inv(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0L;
  long double log_det = 0.0L;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0L) throw std::runtime_error("singular");
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    const long double p = a[col][col];
    log_det += std::log(std::fabs(p));
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= p;
      inv[col][j] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const long double f = a[r][col];
      if (f == 0.0L) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  if (log_abs_det) *log_abs_det = log_det;
  return inv;
}

inline long double quad_form(const Dense& inv, const std::vector<long double>& q) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) s += q[i] * inv[i][j] * q[j];
  return s;
}

inline long double mahalanobis_sq(std::span<const double> x, std::span<const double> mu,
                                  const gmu::Matrix& sigma) {
  std::vector<long double> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q[i] = static_cast<long double>(x[i]) - mu[i];
  return quad_form(invert(to_dense(sigma)), q);
}

// Per-class log pi + log N(x | mu, Sigma_eff) using a dense inverse and determinant.
inline std::vector<long double> log_scores(const gmu::GmmModel& m, std::span<const double> x) {
  const long double log_2pi = std::log(2.0L * 3.14159265358979323846264338327950288L);
  std::vector<long double> out;
  for (const auto& comp : m.components) {
    long double log_det = 0.0L;
    const Dense inv = invert(to_dense(comp.effective_sigma()), &log_det);
    std::vector<long double> q(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) q[i] = static_cast<long double>(x[i]) - comp.mu[i];
    out.push_back(static_cast<long double>(comp.log_pi) - 0.5L * m.d * log_2pi - 0.5L * log_det -
                  0.5L * quad_form(inv, q));
  }
  return out;
}

inline std::vector<double> responsibilities(const gmu::GmmModel& m, std::span<const double> x) {
  const auto s = log_scores(m, x);
  const long double mx = *std::max_element(s.begin(), s.end());
  long double total = 0.0L;
  for (auto v : s) total += std::exp(v - mx);
  std::vector<double> r;
  for (auto v : s) r.push_back(static_cast<double>(std::exp(v - mx) / total));
  return r;
}

inline int classify(const gmu::GmmModel& m, std::span<const double> x) {
  const auto s = log_scores(m, x);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
          int depth) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid);
    const double rm = 0.5 * (mid + hi);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return rec(lo, mid, flo, flm, fmid, left, eps / 2.0, depth - 1) +
           rec(mid, hi, fmid, frm, fhi, right, eps / 2.0, depth - 1);
  };
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 60);
}

// Chi-square CDF by integrating the density after substituting x = u^2,
// which removes the x^{k/2-1} singularity at zero for k = 1.
inline double chi2_cdf(double x, int k) {
  if (x <= 0.0) return 0.0;
  const double log_norm = 0.5 * k * std::log(2.0) + std::lgamma(0.5 * k);
  auto g = [&](double u) {
    if (u == 0.0) return k == 1 ? 2.0 * std::exp(-log_norm) : 0.0;
    return 2.0 * std::exp((k - 1) * std::log(u) - 0.5 * u * u - log_norm);
  };
  return adaptive_simpson(g, 0.0, std::sqrt(x), 1e-10);
}

inline double chi2_quantile(int k, double p) {
  double lo = 0.0;
  double hi = k + 40.0 * std::sqrt(2.0 * k) + 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, k) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle

namespace gen {

using Rng = std::mt19937_64;

inline double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }
inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// A A^T + eps I with A standard normal: well conditioned for small d.
inline gmu::Matrix spd(std::size_t d, Rng& rng, double eps = 0.5) {
  gmu::Matrix a(d, d);
  for (auto& v : a.values()) v = normal(rng);
  gmu::Matrix s = a * a.transposed();
  for (std::size_t i = 0; i < d; ++i) s(i, i) += eps;
  return s;
}

inline gmu::Vector vec(std::size_t d, Rng& rng, double scale = 1.0) {
  gmu::Vector v(d);
  for (auto& x : v) x = scale * normal(rng);
  return v;
}

// Random C-class model with Dirichlet-ish priors.
inline gmu::GmmModel model(std::size_t d, std::size_t c, Rng& rng, double spread = 3.0) {
  gmu::GmmModel m;
  m.d = d;
  m.num_classes = c;
  std::vector<double> w(c);
  double total = 0.0;
  for (auto& x : w) total += (x = uniform(rng, 0.2, 1.0));
  for (std::size_t k = 0; k < c; ++k) {
    m.components.push_back(gmu::make_component(static_cast<int>(k), vec(d, rng, spread),
                                               spd(d, rng), std::log(w[k] / total), 100));
  }
  return m;
}

// n draws from N(mu, L L^T), L the Cholesky factor computed here.
inline gmu::Matrix gaussian_rows(std::size_t n, const gmu::Vector& mu, const gmu::Matrix& cov,
                                 Rng& rng) {
  const std::size_t d = mu.size();
  gmu::Matrix l(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = cov(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = i == j ? std::sqrt(s) : s / l(j, j);
    }
  gmu::Matrix out(n, d);
  std::vector<double> z(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (auto& v : z) v = normal(rng);
    for (std::size_t i = 0; i < d; ++i) {
      double s = mu[i];
      for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z[k];
      out(r, i) = s;
    }
  }
  return out;
}

}  // namespace gen
