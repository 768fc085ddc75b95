#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gmu/linalg.hpp"

namespace gmu {

inline constexpr double kDefaultJitterRel = 1e-6;

/// n labeled feature vectors of dimension d (features stored n x d).
struct FeatureSet {
  Matrix features;
  std::vector<std::int32_t> labels;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  std::span<const double> row(std::size_t i) const noexcept { return features.row(i); }
};

/// Throws unless labels match the rows, every label lies in [0, num_classes)
/// and every feature is finite.
void validate(const FeatureSet& data, std::size_t num_classes);

struct ClassComponent {
  int class_id = 0;
  Vector mu;
  Matrix sigma;      // covariance without jitter
  SpdFactor factor;  // factor of sigma + jitter * I
  double log_pi = 0.0;
  std::size_t count = 0;
  double jitter = 0.0;  // absolute diagonal loading applied to the factor

  /// sigma + jitter * I, the covariance the factor actually represents.
  Matrix effective_sigma() const;
};

/// Builds a component and its factor. Throws NotPositiveDefinite if
/// sigma + jitter * I does not factorize.
ClassComponent make_component(int class_id, Vector mu, Matrix sigma, double log_pi,
                              std::size_t count, double jitter = 0.0);

struct GmmModel {
  std::size_t d = 0;
  std::size_t num_classes = 0;
  std::vector<ClassComponent> components;
  double jitter_rel = kDefaultJitterRel;
  std::vector<std::string> class_names;

  /// Checks one component per class id, matching dimensions and priors that
  /// sum to one.
  void validate() const;
};

/// Class-conditional maximum-support fit: per class the sample mean, the
/// unbiased covariance, and the label frequency as prior.
GmmModel fit_gmm(const FeatureSet& data, std::size_t num_classes,
                 double jitter_rel = kDefaultJitterRel);

/// Shrinkage weight toward the diagonal applied to classes with count <= d + 1.
double shrinkage_weight(std::size_t count, std::size_t d);

/// log pi_c + log N(x | mu_c, Sigma_c) for every class, written into out.
void component_log_scores(const GmmModel& model, std::span<const double> x,
                          std::span<double> out);
Vector component_log_scores(const GmmModel& model, std::span<const double> x);

double mixture_log_density(const GmmModel& model, std::span<const double> x);

Vector responsibilities(const GmmModel& model, std::span<const double> x);
/// Softmax of precomputed scores, in place.
void softmax_in_place(std::span<double> scores);

int classify(const GmmModel& model, std::span<const double> x);
/// Argmax with ties going to the lowest index.
int argmax(std::span<const double> values);

}  // namespace gmu
