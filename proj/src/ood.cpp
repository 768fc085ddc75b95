#include "gmu/ood.hpp"

#include <limits>
#include <string>

#include "gmu/error.hpp"
#include "gmu/parallel.hpp"
#include "gmu/special.hpp"

namespace gmu {

OodPolicy make_policy(std::size_t d, double alpha) {
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "policy dimension must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidProbability, "alpha must lie in (0, 1)");
  }
  return {d, alpha, chi2_quantile(static_cast<int>(d), 1.0 - alpha)};
}

OodResult is_ood(const GmmModel& model, std::span<const double> x, const OodPolicy& policy) {
  if (x.size() != model.d) throw Error(ErrorCode::DimensionMismatch, "is_ood sample dimension");
  if (policy.d != model.d) {
    throw Error(ErrorCode::DimensionMismatch, "policy built for d=" + std::to_string(policy.d) +
                                                  ", model has d=" + std::to_string(model.d));
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& comp : model.components) {
    best = std::min(best, mahalanobis_sq(x, comp.mu, comp.factor));
  }
  return {best > policy.threshold, best};
}

std::vector<SampleReport> score_batch(const GmmModel& model, const GmmEnsemble& ensemble,
                                      const OodPolicy& policy, const Matrix& batch,
                                      std::size_t threads) {
  std::vector<SampleReport> out(batch.rows());
  if (batch.rows() == 0) return out;
  if (batch.cols() != model.d) {
    throw Error(ErrorCode::DimensionMismatch, "batch has " + std::to_string(batch.cols()) +
                                                  " columns, model expects " +
                                                  std::to_string(model.d));
  }
  check_compatible(model, ensemble);

  parallel_for(batch.rows(), threads, [&](std::size_t i) {
    auto x = batch.row(i);
    Vector scores = component_log_scores(model, x);
    const auto ev = evaluate_ensemble(ensemble, x);
    const auto ood = is_ood(model, x, policy);

    SampleReport& r = out[i];
    r.predicted_class = argmax(scores);
    r.epistemic = ev.epistemic;
    r.aleatoric = ev.aleatoric;
    r.min_mahalanobis_sq = ood.min_d2;
    r.is_ood = ood.flag;
    r.aleatoric_valid = !ood.flag;
    r.ddu_score = -log_sum_exp(scores);
    r.responsibility_class = argmax(ev.mean_resp);
    r.confidence = ev.mean_resp[static_cast<std::size_t>(r.responsibility_class)];
  });
  return out;
}

}  // namespace gmu
