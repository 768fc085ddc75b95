#include "gmu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "gmu/csv.hpp"
#include "gmu/error.hpp"
#include "gmu/special.hpp"

namespace gmu {

std::size_t calibration_bin(double confidence, std::size_t num_bins) {
  const double scaled = std::ceil(confidence * static_cast<double>(num_bins));
  if (scaled <= 1.0) return 0;
  return std::min(num_bins - 1, static_cast<std::size_t>(scaled) - 1);
}

CalibrationReport ece(std::span<const double> confidences, const std::vector<bool>& correct,
                      std::size_t num_bins) {
  if (confidences.size() != correct.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(confidences.size()) +
                                               " confidences vs " +
                                               std::to_string(correct.size()) + " outcomes");
  }
  if (confidences.empty()) throw Error(ErrorCode::EmptyInput, "no samples for calibration");
  if (num_bins == 0) throw Error(ErrorCode::InvalidArgument, "need at least one bin");

  CalibrationReport r;
  r.num_bins = num_bins;
  r.bin_edges.resize(num_bins + 1);
  for (std::size_t b = 0; b <= num_bins; ++b)
    r.bin_edges[b] = static_cast<double>(b) / static_cast<double>(num_bins);
  r.bin_confidence.assign(num_bins, 0.0);
  r.bin_accuracy.assign(num_bins, 0.0);
  r.bin_weight.assign(num_bins, 0.0);
  r.bin_count.assign(num_bins, 0);

  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "confidence outside [0, 1] at sample " +
                                                  std::to_string(i));
    }
    const std::size_t b = calibration_bin(c, num_bins);
    r.bin_confidence[b] += c;
    r.bin_accuracy[b] += correct[i] ? 1.0 : 0.0;
    ++r.bin_count[b];
  }

  const double n = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < num_bins; ++b) {
    if (r.bin_count[b] == 0) continue;
    const double cnt = static_cast<double>(r.bin_count[b]);
    r.bin_confidence[b] /= cnt;
    r.bin_accuracy[b] /= cnt;
    r.bin_weight[b] = cnt / n;
    r.ece += r.bin_weight[b] * std::abs(r.bin_accuracy[b] - r.bin_confidence[b]);
  }
  return r;
}

void write_calibration_csv(const CalibrationReport& report, std::ostream& os) {
  CsvWriter csv(os);
  csv.row({"bin_low", "bin_high", "weight", "confidence", "accuracy"});
  for (std::size_t b = 0; b < report.num_bins; ++b) {
    csv.row({format_double(report.bin_edges[b]), format_double(report.bin_edges[b + 1]),
             format_double(report.bin_weight[b]),
             format_double(report.bin_confidence[b]), format_double(report.bin_accuracy[b])});
  }
}

OodConfusion ood_confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                       std::size_t tn) {
  OodConfusion m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  if (tp + fn > 0) {
    const double pos = static_cast<double>(tp + fn);
    m.column_normalized[0][0] = static_cast<double>(tp) / pos;
    m.column_normalized[1][0] = static_cast<double>(fn) / pos;
  }
  if (fp + tn > 0) {
    const double neg = static_cast<double>(fp + tn);
    m.column_normalized[0][1] = static_cast<double>(fp) / neg;
    m.column_normalized[1][1] = static_cast<double>(tn) / neg;
  }
  return m;
}

OodConfusion ood_confusion(const std::vector<bool>& predicted_ood,
                           const std::vector<bool>& true_ood) {
  if (predicted_ood.size() != true_ood.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predicted_ood.size()) +
                                               " predictions vs " +
                                               std::to_string(true_ood.size()) + " labels");
  }
  if (predicted_ood.empty()) throw Error(ErrorCode::EmptyInput, "no samples for confusion");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < predicted_ood.size(); ++i) {
    const bool p = predicted_ood[i];
    const bool t = true_ood[i];
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
    else ++tn;
  }
  return ood_confusion_from_counts(tp, fp, fn, tn);
}

Vector softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be > 0");
  Vector p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw Error(ErrorCode::NonFinite, "non-finite logit");
    p[i] = logits[i] / temperature;
  }
  const double lse = log_sum_exp(p);
  for (double& v : p) v = std::exp(v - lse);
  return p;
}

double softmax_entropy(std::span<const double> logits, double temperature) {
  return entropy(softmax(logits, temperature));
}

double softmax_nll(const Matrix& logits, std::span<const std::int32_t> labels,
                   double temperature) {
  if (logits.rows() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "logit rows and label count differ");
  }
  if (logits.rows() == 0) throw Error(ErrorCode::EmptyInput, "no samples for NLL");
  Vector scaled(logits.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw Error(ErrorCode::BadLabel, "label " + std::to_string(y) + " outside logit range");
    }
    auto row = logits.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) scaled[c] = row[c] / temperature;
    total += log_sum_exp(scaled) - scaled[static_cast<std::size_t>(y)];
  }
  return total / static_cast<double>(logits.rows());
}

TemperatureFit temperature_scale(const Matrix& logits, std::span<const std::int32_t> labels) {
  constexpr double kTol = 1e-4;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto nll = [&](double t) { return softmax_nll(logits, labels, t); };

  double a = kMinTemperature;
  double b = kMaxTemperature;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = nll(x1);
  double f2 = nll(x2);
  while (b - a > kTol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = nll(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = nll(x2);
    }
  }

  TemperatureFit fit;
  fit.nll_at_one = nll(1.0);
  double best = 0.5 * (a + b);
  double best_nll = nll(best);
  // NLL is unimodal in temperature, so a bracket that collapsed onto a bound
  // means the minimum is at (or beyond) that bound.
  if (a - kMinTemperature < kTol) {
    const double f = nll(kMinTemperature);
    if (f <= best_nll) {
      best = kMinTemperature;
      best_nll = f;
    }
    fit.clamped = true;
  } else if (kMaxTemperature - b < kTol) {
    const double f = nll(kMaxTemperature);
    if (f <= best_nll) {
      best = kMaxTemperature;
      best_nll = f;
    }
    fit.clamped = true;
  }

  const double flat_tol = 1e-12 * std::max(1.0, std::abs(fit.nll_at_one));
  if (best_nll >= fit.nll_at_one - flat_tol) {
    fit.temperature = 1.0;
    fit.nll = fit.nll_at_one;
    fit.clamped = false;
  } else {
    fit.temperature = best;
    fit.nll = best_nll;
  }
  return fit;
}

}  // namespace gmu
