#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gmu {

using Vector = std::vector<double>;

/// Dense row-major matrix. Only what the mixture code needs: element access,
/// products, and triangular solves live in free functions below.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  double trace() const;
  double max_abs() const;
  Matrix transposed() const;

  Matrix& operator*=(double s);
  Matrix& operator+=(const Matrix& other);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix m);
Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);

/// Frobenius norm of a - b divided by the Frobenius norm of b.
double relative_frobenius(const Matrix& a, const Matrix& b);

/// Lower Cholesky factor of an SPD matrix together with its log-determinant.
/// Immutable once built.
class SpdFactor {
 public:
  SpdFactor() = default;

  std::size_t dim() const noexcept { return lower_.rows(); }
  const Matrix& lower() const noexcept { return lower_; }
  double log_det() const noexcept { return log_det_; }

  /// L * L^T.
  Matrix reconstruct() const;

  /// Solves L y = b in place.
  void solve_lower(std::span<double> b) const;
  /// Solves L^T y = b in place.
  void solve_upper(std::span<double> b) const;

  /// Wraps an existing lower-triangular factor. Throws NotPositiveDefinite
  /// when a diagonal entry is not strictly positive.
  static SpdFactor from_lower(Matrix lower);

 private:
  Matrix lower_;
  double log_det_ = 0.0;
};

SpdFactor cholesky(const Matrix& m, double jitter = 0.0);

double mahalanobis_sq(std::span<const double> x, std::span<const double> mean,
                      const SpdFactor& factor);

double log_mvn_pdf(std::span<const double> x, std::span<const double> mean,
                   const SpdFactor& factor);

double log_sum_exp(std::span<const double> v);

/// Inverse of the matrix whose factor is given, assembled from triangular solves.
Matrix spd_inverse(const SpdFactor& factor);

}  // namespace gmu
