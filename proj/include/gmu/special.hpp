#pragma once

#include <span>

namespace gmu {

/// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

double chi2_cdf(double x, int dof);

/// x such that chi2_cdf(x, dof) == p.
double chi2_quantile(int dof, double p);

enum class LogBase { natural, two };

/// Shannon entropy with 0 log 0 = 0. Input must be a probability vector.
double entropy(std::span<const double> p, LogBase base = LogBase::natural);

}  // namespace gmu
