#include "gmu/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gmu/error.hpp"

namespace gmu {

void validate(const FeatureSet& data, std::size_t num_classes) {
  if (data.labels.size() != data.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(data.labels.size()) + " labels for " +
                                               std::to_string(data.size()) + " feature rows");
  }
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    const auto label = data.labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw Error(ErrorCode::BadLabel, "sample " + std::to_string(i) + " has label " +
                                           std::to_string(label) + " outside [0, " +
                                           std::to_string(num_classes) + ")");
    }
  }
  for (double v : data.features.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite feature value");
  }
}

Matrix ClassComponent::effective_sigma() const {
  Matrix s = sigma;
  for (std::size_t i = 0; i < s.rows(); ++i) s(i, i) += jitter;
  return s;
}

ClassComponent make_component(int class_id, Vector mu, Matrix sigma, double log_pi,
                              std::size_t count, double jitter) {
  if (sigma.rows() != mu.size() || !sigma.square()) {
    throw Error(ErrorCode::DimensionMismatch, "component mean and covariance disagree");
  }
  ClassComponent c;
  c.class_id = class_id;
  c.factor = cholesky(sigma, jitter);
  c.mu = std::move(mu);
  c.sigma = std::move(sigma);
  c.log_pi = log_pi;
  c.count = count;
  c.jitter = jitter;
  return c;
}

void GmmModel::validate() const {
  if (components.size() != num_classes || num_classes == 0) {
    throw Error(ErrorCode::InvalidArgument, "model needs exactly one component per class");
  }
  double prior_sum = 0.0;
  for (std::size_t c = 0; c < components.size(); ++c) {
    const auto& comp = components[c];
    if (comp.class_id != static_cast<int>(c)) {
      throw Error(ErrorCode::InvalidArgument, "components must be ordered by class id");
    }
    if (comp.mu.size() != d || comp.factor.dim() != d) {
      throw Error(ErrorCode::DimensionMismatch, "component " + std::to_string(c) + " dimension");
    }
    if (comp.log_pi > 0.0) throw Error(ErrorCode::InvalidArgument, "log prior above zero");
    prior_sum += std::exp(comp.log_pi);
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::NotNormalized, "priors sum to " + std::to_string(prior_sum));
  }
  if (!class_names.empty() && class_names.size() != num_classes) {
    throw Error(ErrorCode::LengthMismatch, "class name count differs from class count");
  }
}

double shrinkage_weight(std::size_t count, std::size_t d) {
  if (count > d + 1) return 0.0;
  const double num = static_cast<double>(d + 2) - static_cast<double>(count);
  return std::min(1.0, num / static_cast<double>(d + 2));
}

GmmModel fit_gmm(const FeatureSet& data, std::size_t num_classes, double jitter_rel) {
  if (num_classes == 0) throw Error(ErrorCode::InvalidArgument, "need at least one class");
  if (!(jitter_rel >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jitter_rel must be >= 0");
  if (data.size() == 0) throw Error(ErrorCode::EmptyInput, "empty feature set");
  validate(data, num_classes);

  const std::size_t d = data.dim();
  const std::size_t n = data.size();
  std::vector<std::size_t> counts(num_classes, 0);
  Matrix sums(num_classes, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(data.labels[i]);
    ++counts[c];
    auto x = data.row(i);
    auto s = sums.row(c);
    for (std::size_t k = 0; k < d; ++k) s[k] += x[k];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorCode::MissingClass, "class " + std::to_string(c) + " has no samples");
    }
    if (counts[c] < 2) {
      throw Error(ErrorCode::SingularClass,
                  "class " + std::to_string(c) + " needs at least 2 samples for a covariance");
    }
  }

  std::vector<Vector> means(num_classes, Vector(d));
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t k = 0; k < d; ++k)
      means[c][k] = sums(c, k) / static_cast<double>(counts[c]);

  // Second pass over centered samples, lower triangle only, in sample order.
  std::vector<Matrix> scatter(num_classes, Matrix(d, d));
  Vector centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(data.labels[i]);
    auto x = data.row(i);
    for (std::size_t k = 0; k < d; ++k) centered[k] = x[k] - means[c][k];
    Matrix& s = scatter[c];
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t k = 0; k <= r; ++k) s(r, k) += centered[r] * centered[k];
  }

  GmmModel model;
  model.d = d;
  model.num_classes = num_classes;
  model.jitter_rel = jitter_rel;
  model.components.reserve(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    Matrix sigma = std::move(scatter[c]);
    const double denom = static_cast<double>(counts[c] - 1);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t k = 0; k <= r; ++k) {
        sigma(r, k) /= denom;
        sigma(k, r) = sigma(r, k);
      }
    const double lambda = shrinkage_weight(counts[c], d);
    if (lambda > 0.0) {
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t k = 0; k < d; ++k)
          if (r != k) sigma(r, k) *= (1.0 - lambda);
    }
    const double mean_var = sigma.trace() / static_cast<double>(d);
    // A zero-variance class has no scale to be relative to; fall back to
    // using jitter_rel as an absolute floor.
    const double jitter = mean_var > 0.0 ? jitter_rel * mean_var : jitter_rel;
    const double log_pi =
        std::log(static_cast<double>(counts[c])) - std::log(static_cast<double>(n));
    try {
      model.components.push_back(make_component(static_cast<int>(c), std::move(means[c]),
                                                std::move(sigma), log_pi, counts[c], jitter));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotPositiveDefinite) throw;
      throw Error(ErrorCode::SingularClass,
                  "covariance of class " + std::to_string(c) + " does not factorize");
    }
  }
  return model;
}

void component_log_scores(const GmmModel& model, std::span<const double> x,
                          std::span<double> out) {
  if (x.size() != model.d) {
    throw Error(ErrorCode::DimensionMismatch, "expected dimension " + std::to_string(model.d) +
                                                  ", got " + std::to_string(x.size()));
  }
  if (out.size() != model.components.size()) {
    throw Error(ErrorCode::DimensionMismatch, "score buffer size");
  }
  for (std::size_t c = 0; c < model.components.size(); ++c) {
    const auto& comp = model.components[c];
    out[c] = comp.log_pi + log_mvn_pdf(x, comp.mu, comp.factor);
  }
}

Vector component_log_scores(const GmmModel& model, std::span<const double> x) {
  Vector out(model.components.size());
  component_log_scores(model, x, out);
  return out;
}

double mixture_log_density(const GmmModel& model, std::span<const double> x) {
  return log_sum_exp(component_log_scores(model, x));
}

void softmax_in_place(std::span<double> scores) {
  const double lse = log_sum_exp(scores);
  for (double& s : scores) s = std::exp(s - lse);
}

Vector responsibilities(const GmmModel& model, std::span<const double> x) {
  Vector scores = component_log_scores(model, x);
  softmax_in_place(scores);
  return scores;
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

int classify(const GmmModel& model, std::span<const double> x) {
  return argmax(component_log_scores(model, x));
}

}  // namespace gmu
