#pragma once

#include <cstddef>
#include <vector>

#include "gmu/ensemble.hpp"
#include "gmu/gmm.hpp"

namespace gmu {

inline constexpr double kDefaultAlpha = 0.025;

/// Chi-square acceptance region for squared Mahalanobis distances. A sample
/// with distance above `threshold` to every component is out of distribution.
struct OodPolicy {
  std::size_t d = 0;
  double alpha = kDefaultAlpha;
  double threshold = 0.0;
};

OodPolicy make_policy(std::size_t d, double alpha = kDefaultAlpha);

struct OodResult {
  bool flag = false;
  double min_d2 = 0.0;
};

/// Tests against the point-estimate components; the minimum distance over
/// classes decides.
OodResult is_ood(const GmmModel& model, std::span<const double> x, const OodPolicy& policy);

struct SampleReport {
  int predicted_class = 0;
  double epistemic = 0.0;
  double aleatoric = 0.0;
  double min_mahalanobis_sq = 0.0;
  bool is_ood = false;
  bool aleatoric_valid = true;
  double ddu_score = 0.0;
  /// Largest mean responsibility and its class; the calibration inputs.
  double confidence = 0.0;
  int responsibility_class = 0;
};

/// Scores every row of `batch` (n x d). Rows are processed independently and
/// written in input order, so any thread count gives identical output.
std::vector<SampleReport> score_batch(const GmmModel& model, const GmmEnsemble& ensemble,
                                      const OodPolicy& policy, const Matrix& batch,
                                      std::size_t threads = 1);

}  // namespace gmu
