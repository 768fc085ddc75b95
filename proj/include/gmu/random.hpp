#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "gmu/linalg.hpp"

namespace gmu {

/// Counter-based random stream (Philox4x32-10). The key is the seed and the
/// stream id occupies the upper half of the counter, so every (seed, stream)
/// pair addresses its own disjoint sequence. Output depends only on integer
/// arithmetic; all variates derived from it are platform independent up to
/// libm rounding of log/sqrt.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double standard_normal();
  /// Gamma(shape, 1) variate.
  double gamma(double shape);
  double chi_square(double dof);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

Vector sample_gaussian(std::span<const double> mean, const SpdFactor& factor, RngStream& rng);

/// Wishart draw with scale L L^T via the Bartlett decomposition.
Matrix sample_wishart(const SpdFactor& scale_factor, double dof, RngStream& rng);

/// W^{-1} with W ~ Wishart(psi^{-1}, nu). Requires nu > d + 1.
Matrix sample_inverse_wishart(const Matrix& psi, double nu, RngStream& rng);
/// Same draw given a precomputed factor of psi.
Matrix sample_inverse_wishart(const SpdFactor& psi_factor, double nu, RngStream& rng);

}  // namespace gmu
