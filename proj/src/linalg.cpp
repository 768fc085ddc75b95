#include "gmu/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gmu/error.hpp"

namespace gmu {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch, "matrix value count does not match shape");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

double Matrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw Error(ErrorCode::DimensionMismatch, "matrix sum shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix product shape mismatch");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix operator*(double s, Matrix m) {
  m *= s;
  return m;
}

Matrix operator+(Matrix a, const Matrix& b) {
  a += b;
  return a;
}

Matrix operator-(Matrix a, const Matrix& b) {
  a += -1.0 * b;
  return a;
}

double relative_frobenius(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "relative_frobenius shape mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    num += (av[i] - bv[i]) * (av[i] - bv[i]);
    den += bv[i] * bv[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

Matrix SpdFactor::reconstruct() const {
  const std::size_t n = dim();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= j; ++k) s += lower_(i, k) * lower_(j, k);
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  return m;
}

void SpdFactor::solve_lower(std::span<double> b) const {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower_(i, k) * b[k];
    b[i] = s / lower_(i, i);
  }
}

void SpdFactor::solve_upper(std::span<double> b) const {
  const std::size_t n = dim();
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= lower_(k, ii) * b[k];
    b[ii] = s / lower_(ii, ii);
  }
}

SpdFactor SpdFactor::from_lower(Matrix lower) {
  if (!lower.square()) throw Error(ErrorCode::DimensionMismatch, "factor must be square");
  SpdFactor f;
  double log_det = 0.0;
  for (std::size_t i = 0; i < lower.rows(); ++i) {
    const double d = lower(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(ErrorCode::NotPositiveDefinite, "non-positive diagonal in factor");
    }
    for (std::size_t j = i + 1; j < lower.cols(); ++j) lower(i, j) = 0.0;
    log_det += std::log(d);
  }
  f.lower_ = std::move(lower);
  f.log_det_ = 2.0 * log_det;
  return f;
}

SpdFactor cholesky(const Matrix& m, double jitter) {
  if (!m.square()) throw Error(ErrorCode::DimensionMismatch, "cholesky needs a square matrix");
  if (!(jitter >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jitter must be nonnegative");
  const std::size_t n = m.rows();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "cholesky of an empty matrix");

  const double scale = std::max(m.max_abs(), std::numeric_limits<double>::min());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (!std::isfinite(m(i, j)) || !std::isfinite(m(j, i))) {
        throw Error(ErrorCode::NonFinite, "non-finite matrix entry");
      }
      if (std::abs(m(i, j) - m(j, i)) > 1e-8 * scale) {
        throw Error(ErrorCode::AsymmetricInput,
                    "entries (" + std::to_string(i) + "," + std::to_string(j) + ") differ");
      }
    }
  }

  Matrix lower(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = m(j, j) + jitter;
    for (std::size_t k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "non-positive pivot at column " + std::to_string(j));
    }
    const double ljj = std::sqrt(pivot);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      // Read the lower triangle so callers may pass a nearly symmetric matrix.
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return SpdFactor::from_lower(std::move(lower));
}

double mahalanobis_sq(std::span<const double> x, std::span<const double> mean,
                      const SpdFactor& factor) {
  const std::size_t n = factor.dim();
  if (x.size() != n || mean.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "mahalanobis_sq dimension mismatch");
  }
  // Small fixed-size buffer avoids an allocation per call for typical d.
  double stack_buf[64];
  std::vector<double> heap_buf;
  std::span<double> z;
  if (n <= 64) {
    z = std::span<double>(stack_buf, n);
  } else {
    heap_buf.resize(n);
    z = heap_buf;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - mean[i];
  factor.solve_lower(z);
  double s = 0.0;
  for (double v : z) s += v * v;
  return s;
}

double log_mvn_pdf(std::span<const double> x, std::span<const double> mean,
                   const SpdFactor& factor) {
  const double d2 = mahalanobis_sq(x, mean, factor);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  return -0.5 * (static_cast<double>(factor.dim()) * log_2pi + factor.log_det() + d2);
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::EmptyInput, "log_sum_exp of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  if (m == -std::numeric_limits<double>::infinity()) {
    throw Error(ErrorCode::AllNegativeInfinity, "every entry is -inf");
  }
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

Matrix spd_inverse(const SpdFactor& factor) {
  const std::size_t n = factor.dim();
  Matrix inv(n, n);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    factor.solve_lower(col);
    factor.solve_upper(col);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double s = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = s;
      inv(j, i) = s;
    }
  return inv;
}

}  // namespace gmu
