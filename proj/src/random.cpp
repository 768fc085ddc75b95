#include "gmu/random.hpp"

#include <cmath>
#include <string>

#include "gmu/error.hpp"

namespace gmu {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

Matrix bartlett_factor(std::size_t d, double dof, RngStream& rng) {
  Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chi_square(dof - static_cast<double>(i)));
    for (std::size_t j = 0; j < i; ++j) a(i, j) = rng.standard_normal();
  }
  return a;
}

// Lower-triangular product a * b.
Matrix lower_product(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k <= i; ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

// m * m^T written symmetrically.
Matrix gram(const Matrix& m) {
  const std::size_t n = m.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m.cols(); ++k) s += m(i, k) * m(j, k);
      out(i, j) = s;
      out(j, i) = s;
    }
  return out;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

void RngStream::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  const auto out = philox4x32(ctr, key);
  ++block_;
  buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  buffered_ = 2;
}

std::uint64_t RngStream::next_u64() {
  if (buffered_ == 0) refill();
  return buffer_[2 - buffered_--];
}

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

// Marsaglia polar method; needs only log and sqrt.
double RngStream::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_ = true;
  return u * f;
}

// Marsaglia-Tsang squeeze/accept for shape >= 1; shape < 1 is boosted by
// drawing Gamma(shape + 1) and scaling with U^{1/shape}.
double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma shape must be positive");
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = standard_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

Vector sample_gaussian(std::span<const double> mean, const SpdFactor& factor, RngStream& rng) {
  const std::size_t d = factor.dim();
  if (mean.size() != d) throw Error(ErrorCode::DimensionMismatch, "sample_gaussian dimension");
  Vector z(d);
  for (double& v : z) v = rng.standard_normal();
  const Matrix& l = factor.lower();
  Vector out(mean.begin(), mean.end());
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z[k];
    out[i] += s;
  }
  return out;
}

Matrix sample_wishart(const SpdFactor& scale_factor, double dof, RngStream& rng) {
  const std::size_t d = scale_factor.dim();
  if (!(dof > static_cast<double>(d) - 1.0)) {
    throw Error(ErrorCode::InvalidDegreesOfFreedom,
                "Wishart needs dof > d - 1, got " + std::to_string(dof));
  }
  const Matrix a = bartlett_factor(d, dof, rng);
  return gram(lower_product(scale_factor.lower(), a));
}

Matrix sample_inverse_wishart(const Matrix& psi, double nu, RngStream& rng) {
  if (!psi.square()) throw Error(ErrorCode::DimensionMismatch, "psi must be square");
  if (!(nu > static_cast<double>(psi.rows()) + 1.0)) {
    throw Error(ErrorCode::InvalidDegreesOfFreedom,
                "inverse Wishart needs nu > d + 1, got " + std::to_string(nu));
  }
  return sample_inverse_wishart(cholesky(psi), nu, rng);
}

Matrix sample_inverse_wishart(const SpdFactor& psi_factor, double nu, RngStream& rng) {
  const std::size_t d = psi_factor.dim();
  if (!(nu > static_cast<double>(d) + 1.0)) {
    throw Error(ErrorCode::InvalidDegreesOfFreedom,
                "inverse Wishart needs nu > d + 1, got " + std::to_string(nu));
  }
  // With psi = M M^T the Wishart(psi^{-1}) draw is W = M^{-T} A A^T M^{-1},
  // hence W^{-1} = (M A^{-T}) (M A^{-T})^T. A^{-T} is upper triangular and
  // comes from triangular solves against the Bartlett factor A.
  const Matrix a = bartlett_factor(d, nu, rng);
  Matrix a_inv_t(d, d);
  for (std::size_t col = 0; col < d; ++col) {
    // Solve A^T y = e_col (A^T upper triangular).
    Vector y(d, 0.0);
    y[col] = 1.0;
    for (std::size_t ii = d; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < d; ++k) s -= a(k, ii) * y[k];
      y[ii] = s / a(ii, ii);
    }
    for (std::size_t r = 0; r < d; ++r) a_inv_t(r, col) = y[r];
  }
  return gram(psi_factor.lower() * a_inv_t);
}

}  // namespace gmu
