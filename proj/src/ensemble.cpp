#include "gmu/ensemble.hpp"

#include <cmath>
#include <string>

#include "gmu/error.hpp"
#include "gmu/parallel.hpp"
#include "gmu/random.hpp"
#include "gmu/special.hpp"

namespace gmu {
namespace {

constexpr int kJitterEscalations = 3;

std::string class_label(const ParamPosterior& p, std::size_t c) {
  std::string s = "class " + std::to_string(c);
  if (c < p.class_names.size() && !p.class_names[c].empty()) s += " (" + p.class_names[c] + ")";
  return s;
}

ClassComponent draw_component(const ParamPosterior& posterior, std::size_t c, RngStream& rng) {
  const ClassPosterior& cp = posterior.classes[c];
  Vector mu = sample_gaussian(cp.mean_center, cp.mean_cov_factor, rng);
  Matrix sigma = sample_inverse_wishart(cp.iw_scale_factor, cp.iw_dof, rng);

  const double mean_var = sigma.trace() / static_cast<double>(posterior.d);
  const double base = std::max(cp.fit_jitter, 1e-12 * std::abs(mean_var));
  double jitter = 0.0;
  for (int attempt = 0; attempt <= kJitterEscalations; ++attempt) {
    try {
      return make_component(static_cast<int>(c), mu, sigma, posterior.log_pi[c], cp.count,
                            jitter);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotPositiveDefinite) throw;
    }
    jitter = base * std::pow(10.0, attempt + 1);
  }
  throw Error(ErrorCode::DegenerateDraw,
              "sampled covariance for " + class_label(posterior, c) + " does not factorize");
}

}  // namespace

ParamPosterior build_posterior(const GmmModel& model) {
  model.validate();
  const std::size_t d = model.d;
  ParamPosterior p;
  p.d = d;
  p.num_classes = model.num_classes;
  p.class_names = model.class_names;
  p.log_pi.reserve(model.num_classes);
  p.classes.reserve(model.num_classes);
  for (std::size_t c = 0; c < model.num_classes; ++c) {
    const ClassComponent& comp = model.components[c];
    if (comp.count <= d + 2) {
      throw Error(ErrorCode::InsufficientSupport,
                  class_label(p, c) + " has " + std::to_string(comp.count) +
                      " samples; the parameter posterior needs more than " +
                      std::to_string(d + 2));
    }
    const double n = static_cast<double>(comp.count);
    const Matrix sigma = comp.effective_sigma();

    ClassPosterior cp;
    cp.mean_center = comp.mu;
    cp.mean_cov_factor = cholesky((1.0 / n) * sigma);
    cp.iw_dof = n;
    cp.iw_scale = (n - static_cast<double>(d) - 1.0) * sigma;
    cp.iw_scale_factor = cholesky(cp.iw_scale);
    cp.count = comp.count;
    cp.fit_jitter = comp.jitter;
    p.log_pi.push_back(comp.log_pi);
    p.classes.push_back(std::move(cp));
  }
  return p;
}

GmmEnsemble sample_ensemble(const ParamPosterior& posterior, std::size_t t, std::uint64_t seed,
                            std::size_t threads) {
  if (t == 0) throw Error(ErrorCode::InvalidArgument, "ensemble size must be at least 1");
  GmmEnsemble ensemble;
  ensemble.seed = seed;
  ensemble.models.resize(t);
  parallel_for(t, threads, [&](std::size_t k) {
    RngStream rng(seed, k);
    GmmModel member;
    member.d = posterior.d;
    member.num_classes = posterior.num_classes;
    member.class_names = posterior.class_names;
    member.jitter_rel = 0.0;
    member.components.reserve(posterior.num_classes);
    for (std::size_t c = 0; c < posterior.num_classes; ++c) {
      member.components.push_back(draw_component(posterior, c, rng));
    }
    ensemble.models[k] = std::move(member);
  });
  return ensemble;
}

void check_compatible(const GmmModel& model, const GmmEnsemble& ensemble) {
  if (ensemble.models.empty()) throw Error(ErrorCode::EmptyInput, "ensemble has no members");
  for (const auto& m : ensemble.models) {
    if (m.d != model.d || m.num_classes != model.num_classes) {
      throw Error(ErrorCode::DimensionMismatch, "ensemble member shape differs from model");
    }
    for (std::size_t c = 0; c < model.num_classes; ++c) {
      if (m.components[c].log_pi != model.components[c].log_pi) {
        throw Error(ErrorCode::InvalidArgument, "ensemble priors differ from model priors");
      }
    }
  }
}

EnsembleEvaluation evaluate_ensemble(const GmmEnsemble& ensemble, std::span<const double> x) {
  if (ensemble.models.empty()) throw Error(ErrorCode::EmptyInput, "ensemble has no members");
  const std::size_t num_classes = ensemble.models.front().num_classes;
  std::vector<std::size_t> votes(num_classes, 0);
  Vector resp_sum(num_classes, 0.0);
  Vector scores(num_classes);
  for (const GmmModel& member : ensemble.models) {
    component_log_scores(member, x, scores);
    ++votes[static_cast<std::size_t>(argmax(scores))];
    softmax_in_place(scores);
    for (std::size_t c = 0; c < num_classes; ++c) resp_sum[c] += scores[c];
  }
  const double t = static_cast<double>(ensemble.size());
  EnsembleEvaluation out;
  out.freq.resize(num_classes);
  out.mean_resp.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    out.freq[c] = static_cast<double>(votes[c]) / t;
    out.mean_resp[c] = resp_sum[c] / t;
  }
  out.epistemic = entropy(out.freq);
  out.aleatoric = entropy(out.mean_resp);
  return out;
}

EpistemicResult epistemic_entropy(const GmmEnsemble& ensemble, std::span<const double> x) {
  auto ev = evaluate_ensemble(ensemble, x);
  return {ev.epistemic, std::move(ev.freq)};
}

Vector mean_responsibilities(const GmmEnsemble& ensemble, std::span<const double> x) {
  return evaluate_ensemble(ensemble, x).mean_resp;
}

double aleatoric_entropy(const GmmEnsemble& ensemble, std::span<const double> x) {
  return evaluate_ensemble(ensemble, x).aleatoric;
}

double ddu_epistemic_score(const GmmModel& model, std::span<const double> x) {
  return -mixture_log_density(model, x);
}

}  // namespace gmu
