#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gmu/gmm.hpp"
#include "gmu/linalg.hpp"

namespace gmu {

inline constexpr std::size_t kDefaultEnsembleSize = 30;

/// Distribution over one class's parameters: a Gaussian over the mean and an
/// inverse Wishart over the covariance.
struct ClassPosterior {
  Vector mean_center;         // fitted mean
  SpdFactor mean_cov_factor;  // factor of Sigma / n
  Matrix iw_scale;            // (n - d - 1) * Sigma
  SpdFactor iw_scale_factor;
  double iw_dof = 0.0;        // n
  std::size_t count = 0;
  double fit_jitter = 0.0;
};

struct ParamPosterior {
  std::size_t d = 0;
  std::size_t num_classes = 0;
  std::vector<double> log_pi;
  std::vector<ClassPosterior> classes;
  std::vector<std::string> class_names;
};

/// Mean covariance Sigma/n, dof n, and scale (n - d - 1) Sigma, so that
/// sampled covariances have expectation Sigma. Sigma is each component's
/// effective (jittered) covariance. Throws InsufficientSupport naming the
/// first class with n <= d + 2.
ParamPosterior build_posterior(const GmmModel& model);

struct GmmEnsemble {
  std::vector<GmmModel> models;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return models.size(); }
};

/// Draws t mixtures; member k consumes RngStream(seed, k) only, so the result
/// is independent of `threads`.
GmmEnsemble sample_ensemble(const ParamPosterior& posterior, std::size_t t, std::uint64_t seed,
                            std::size_t threads = 1);

/// Throws unless every member shares the model's dimension, class count and priors.
void check_compatible(const GmmModel& model, const GmmEnsemble& ensemble);

struct EpistemicResult {
  double entropy = 0.0;
  Vector freq;
};

EpistemicResult epistemic_entropy(const GmmEnsemble& ensemble, std::span<const double> x);
Vector mean_responsibilities(const GmmEnsemble& ensemble, std::span<const double> x);
double aleatoric_entropy(const GmmEnsemble& ensemble, std::span<const double> x);

/// Both uncertainties from a single pass over the members.
struct EnsembleEvaluation {
  Vector freq;
  double epistemic = 0.0;
  Vector mean_resp;
  double aleatoric = 0.0;
};

EnsembleEvaluation evaluate_ensemble(const GmmEnsemble& ensemble, std::span<const double> x);

/// Negative log mixture density of the point-estimate model.
double ddu_epistemic_score(const GmmModel& model, std::span<const double> x);

}  // namespace gmu
