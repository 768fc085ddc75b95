#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gmu/ensemble.hpp"
#include "gmu/gmm.hpp"
#include "gmu/lidar.hpp"
#include "gmu/metrics.hpp"
#include "gmu/ood.hpp"

namespace gmu::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 2;
inline constexpr int kExitInternal = 3;

struct FitOptions {
  std::string features, labels, out, summary;
  double jitter_rel = kDefaultJitterRel;
  std::optional<std::size_t> classes;
  std::vector<std::string> class_names;
};

struct ScoreOptions {
  std::string model, features, out, ensemble_in, ensemble_out;
  std::size_t ensemble_size = kDefaultEnsembleSize;
  std::uint64_t seed = 0;
  double alpha = kDefaultAlpha;
  std::size_t threads = 1;
};

struct EvalOodOptions {
  std::string report, truth, out;
};

enum class CalibrationBaseline { responsibility, softmax };

struct EvalCalibrationOptions {
  CalibrationBaseline baseline = CalibrationBaseline::responsibility;
  std::string report, logits, labels, val_logits, val_labels, out;
  std::optional<double> temperature;
  std::size_t bins = kDefaultBins;
};

struct ProjectOptions {
  std::string scan, labels, label_map, out_prefix;
  ProjectionGeometry geometry;
};

struct SynthOptions {
  std::string spec, out_dir;
  std::optional<std::uint64_t> seed;
};

// Each command writes its outputs and a one-line summary to `log`; failures
// are reported as gmu::Error.
void cmd_fit(const FitOptions& o, std::ostream& log);
void cmd_score(const ScoreOptions& o, std::ostream& log);
OodConfusion cmd_eval_ood(const EvalOodOptions& o, std::ostream& log);
CalibrationReport cmd_eval_calibration(const EvalCalibrationOptions& o, std::ostream& log);
RangeImage cmd_project(const ProjectOptions& o, std::ostream& log);
void cmd_synth(const SynthOptions& o, std::ostream& log);

/// Parses argv-style arguments (without the program name), runs the selected
/// command and returns the process exit code: 0 success, 2 usage or data
/// error, 3 internal invariant violation.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gmu::cli
