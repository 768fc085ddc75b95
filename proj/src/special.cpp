#include "gmu/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gmu/error.hpp"

namespace gmu {
namespace {

constexpr double kEps = 1e-14;
constexpr int kMaxIter = 10000;

double gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper tail Q(a, x) by the modified Lentz continued fraction.
double gamma_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double chi2_log_pdf(double x, double k) {
  const double half = 0.5 * k;
  return (half - 1.0) * std::log(x) - 0.5 * x - half * std::numbers::ln2 - std::lgamma(half);
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma shape must be positive");
  if (x < 0.0) throw Error(ErrorCode::NegativeInput, "incomplete gamma of negative x");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_continued_fraction(a, x);
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw Error(ErrorCode::InvalidDegreesOfFreedom, "dof must be positive");
  if (std::isnan(x)) throw Error(ErrorCode::NonFinite, "chi2_cdf of NaN");
  if (x < 0.0) throw Error(ErrorCode::NegativeInput, "chi2_cdf of a negative value");
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(int dof, double p) {
  if (dof < 1) throw Error(ErrorCode::InvalidDegreesOfFreedom, "dof must be positive");
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::InvalidProbability, "p must lie in (0, 1), got " + std::to_string(p));
  }
  const double k = dof;
  double lo = 0.0;
  double hi = k + 20.0 * std::sqrt(2.0 * k);
  while (chi2_cdf(hi, dof) < p) {
    lo = hi;
    hi *= 2.0;
  }

  // Bisect to a coarse bracket, then polish with Newton steps kept inside it.
  for (int i = 0; i < 200 && hi - lo > 1e-6 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, dof) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 50; ++i) {
    const double f = chi2_cdf(x, dof) - p;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (std::abs(f) < 1e-15) break;
    const double pdf = std::exp(chi2_log_pdf(x, k));
    double next = x - f / pdf;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double entropy(std::span<const double> p, LogBase base) {
  if (p.empty()) throw Error(ErrorCode::EmptyInput, "entropy of an empty vector");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::NotNormalized, "negative or non-finite probability");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::NotNormalized, "probabilities sum to " + std::to_string(total));
  }
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  if (base == LogBase::two) h /= std::numbers::ln2;
  // Rounding can leave a one-hot vector at -0.
  return h < 0.0 ? 0.0 : h;
}

}  // namespace gmu
