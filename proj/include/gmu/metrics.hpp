#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gmu/linalg.hpp"

namespace gmu {

inline constexpr std::size_t kDefaultBins = 15;

struct CalibrationReport {
  std::size_t num_bins = 0;
  std::vector<double> bin_edges;  // num_bins + 1 edges on [0, 1]
  std::vector<double> bin_confidence;
  std::vector<double> bin_accuracy;
  std::vector<double> bin_weight;
  std::vector<std::size_t> bin_count;
  double ece = 0.0;
};

/// Equal-width, right-closed bins on [0, 1]; a confidence of exactly 0 lands
/// in the first bin.
CalibrationReport ece(std::span<const double> confidences, const std::vector<bool>& correct,
                      std::size_t num_bins = kDefaultBins);

std::size_t calibration_bin(double confidence, std::size_t num_bins);

/// Columns: bin_low, bin_high, weight, confidence, accuracy.
void write_calibration_csv(const CalibrationReport& report, std::ostream& os);

/// OOD is the positive class. Scores whose denominator is zero are empty.
struct OodConfusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> precision, recall, f1;
  /// Rows: predicted OOD, predicted ID. Columns: true OOD, true ID. Each
  /// column is normalized by its true-class total.
  std::array<std::array<std::optional<double>, 2>, 2> column_normalized;
};

OodConfusion ood_confusion(const std::vector<bool>& predicted_ood,
                           const std::vector<bool>& true_ood);
OodConfusion ood_confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                       std::size_t tn);

struct TemperatureFit {
  double temperature = 1.0;
  bool clamped = false;  // optimum sits on a search bound
  double nll = 0.0;
  double nll_at_one = 0.0;
};

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;

/// Mean negative log-likelihood of softmax(logits / temperature).
double softmax_nll(const Matrix& logits, std::span<const std::int32_t> labels,
                   double temperature);

/// Golden-section search over [0.05, 20] for the NLL-minimizing temperature.
TemperatureFit temperature_scale(const Matrix& logits, std::span<const std::int32_t> labels);

Vector softmax(std::span<const double> logits, double temperature = 1.0);
double softmax_entropy(std::span<const double> logits, double temperature = 1.0);

}  // namespace gmu
