#include "gmu/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "gmu/csv.hpp"
#include "gmu/error.hpp"
#include "gmu/parallel.hpp"
#include "gmu/persist.hpp"
#include "gmu/report.hpp"
#include "gmu/synth.hpp"
#include "gmu/tensor.hpp"

namespace gmu::cli {
namespace fs = std::filesystem;

namespace {

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + parent.string() + ": " + ec.message());
}

std::ofstream open_output(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

FeatureSet load_features(const std::string& features, const std::string& labels) {
  FeatureSet data;
  data.features = tensor_to_matrix(read_tensor(features));
  data.labels = tensor_to_labels(read_tensor(labels));
  if (data.labels.size() != data.size()) {
    throw Error(ErrorCode::LengthMismatch, features + " has " + std::to_string(data.size()) +
                                               " rows but " + labels + " has " +
                                               std::to_string(data.labels.size()) + " labels");
  }
  return data;
}

std::string optional_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("NA");
}

// (max L_ii / min L_ii)^2 bounds the condition number of the factored matrix from below.
double condition_estimate(const SpdFactor& f) {
  double lo = f.lower()(0, 0);
  double hi = lo;
  for (std::size_t i = 1; i < f.dim(); ++i) {
    lo = std::min(lo, f.lower()(i, i));
    hi = std::max(hi, f.lower()(i, i));
  }
  return (hi / lo) * (hi / lo);
}

std::vector<bool> truth_flags(const std::string& path) {
  const Tensor t = read_tensor(path);
  if (t.rank() != 1) throw Error(ErrorCode::DimensionMismatch, path + " must be rank 1");
  std::vector<bool> flags;
  for (double v : t.to_f64()) flags.push_back(v != 0.0);
  return flags;
}

Tensor image_channel(const RangeImage& img, const std::vector<float>& channel) {
  return Tensor::from_f32({img.geometry.height, img.geometry.width}, channel);
}

}  // namespace

void cmd_fit(const FitOptions& o, std::ostream& log) {
  const FeatureSet data = load_features(o.features, o.labels);
  if (data.size() == 0) throw Error(ErrorCode::EmptyInput, o.features + " has no rows");
  std::size_t classes = 0;
  if (o.classes) {
    classes = *o.classes;
  } else {
    const auto max_label = *std::max_element(data.labels.begin(), data.labels.end());
    classes = static_cast<std::size_t>(std::max(0, max_label)) + 1;
  }
  GmmModel model = fit_gmm(data, classes, o.jitter_rel);
  if (!o.class_names.empty()) {
    if (o.class_names.size() != classes) {
      throw Error(ErrorCode::LengthMismatch, std::to_string(o.class_names.size()) +
                                                 " class names for " + std::to_string(classes) +
                                                 " classes");
    }
    model.class_names = o.class_names;
  }
  ensure_parent(o.out);
  save_model(o.out, model);

  const std::string summary = o.summary.empty() ? o.out + ".summary.csv" : o.summary;
  auto out = open_output(summary);
  CsvWriter csv(out);
  csv.row({"class_id", "name", "count", "prior", "jitter", "condition_estimate"});
  for (const auto& comp : model.components) {
    const auto c = static_cast<std::size_t>(comp.class_id);
    const double prior = static_cast<double>(comp.count) / static_cast<double>(data.size());
    csv.row({std::to_string(comp.class_id), c < model.class_names.size() ? model.class_names[c] : "",
             std::to_string(comp.count), format_double(prior),
             format_double(comp.jitter), format_double(condition_estimate(comp.factor))});
  }
  log << "fitted " << classes << " classes in d=" << model.d << " from " << data.size()
      << " samples -> " << o.out << '\n';
}

void cmd_score(const ScoreOptions& o, std::ostream& log) {
  const GmmModel model = load_model(o.model);
  const Matrix batch = tensor_to_matrix(read_tensor(o.features));
  if (batch.cols() != model.d && batch.rows() > 0) {
    throw Error(ErrorCode::DimensionMismatch, o.features + " has " + std::to_string(batch.cols()) +
                                                  " columns, model expects " +
                                                  std::to_string(model.d));
  }
  GmmEnsemble ensemble;
  if (!o.ensemble_in.empty()) {
    ensemble = load_ensemble(o.ensemble_in);
  } else {
    ensemble = sample_ensemble(build_posterior(model), o.ensemble_size, o.seed, o.threads);
    const std::string path = o.ensemble_out.empty() ? o.out + ".ensemble" : o.ensemble_out;
    ensure_parent(path);
    save_ensemble(path, ensemble);
  }
  const OodPolicy policy = make_policy(model.d, o.alpha);
  const auto reports = score_batch(model, ensemble, policy, batch, o.threads);
  auto out = open_output(o.out);
  write_report_csv(out, reports);
  const auto flagged = std::count_if(reports.begin(), reports.end(),
                                     [](const SampleReport& r) { return r.is_ood; });
  log << "scored " << reports.size() << " samples with " << ensemble.size() << " members; "
      << flagged << " flagged OOD (threshold " << format_double(policy.threshold) << ")\n";
}

OodConfusion cmd_eval_ood(const EvalOodOptions& o, std::ostream& log) {
  const auto reports = read_report_csv(o.report);
  const auto truth = truth_flags(o.truth);
  if (truth.size() != reports.size()) {
    throw Error(ErrorCode::LengthMismatch, o.report + " has " + std::to_string(reports.size()) +
                                               " rows, " + o.truth + " has " +
                                               std::to_string(truth.size()) + " flags");
  }
  std::vector<bool> predicted;
  for (const auto& r : reports) predicted.push_back(r.is_ood);
  const OodConfusion m = ood_confusion(predicted, truth);

  auto out = open_output(o.out);
  CsvWriter csv(out);
  csv.row({"metric", "value"});
  csv.row({"tp", std::to_string(m.tp)});
  csv.row({"fp", std::to_string(m.fp)});
  csv.row({"fn", std::to_string(m.fn)});
  csv.row({"tn", std::to_string(m.tn)});
  csv.row({"precision", optional_text(m.precision)});
  csv.row({"recall", optional_text(m.recall)});
  csv.row({"f1", optional_text(m.f1)});
  csv.row({"pred_ood_true_ood", optional_text(m.column_normalized[0][0])});
  csv.row({"pred_ood_true_id", optional_text(m.column_normalized[0][1])});
  csv.row({"pred_id_true_ood", optional_text(m.column_normalized[1][0])});
  csv.row({"pred_id_true_id", optional_text(m.column_normalized[1][1])});
  log << "precision=" << optional_text(m.precision) << " recall=" << optional_text(m.recall)
      << " f1=" << optional_text(m.f1) << '\n';
  return m;
}

CalibrationReport cmd_eval_calibration(const EvalCalibrationOptions& o, std::ostream& log) {
  const auto labels = tensor_to_labels(read_tensor(o.labels));
  std::vector<double> confidence;
  std::vector<bool> correct;
  if (o.baseline == CalibrationBaseline::responsibility) {
    if (o.report.empty()) throw Error(ErrorCode::InvalidArgument, "--report is required");
    const auto reports = read_report_csv(o.report);
    if (reports.size() != labels.size()) {
      throw Error(ErrorCode::LengthMismatch, std::to_string(reports.size()) + " report rows vs " +
                                                 std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
      confidence.push_back(reports[i].confidence);
      correct.push_back(reports[i].responsibility_class == labels[i]);
    }
  } else {
    if (o.logits.empty()) throw Error(ErrorCode::InvalidArgument, "--logits is required");
    const Matrix logits = tensor_to_matrix(read_tensor(o.logits));
    if (logits.rows() != labels.size()) {
      throw Error(ErrorCode::LengthMismatch, "logit rows and labels differ in length");
    }
    double temperature = 1.0;
    if (o.temperature) {
      temperature = *o.temperature;
    } else if (!o.val_logits.empty() && !o.val_labels.empty()) {
      const Matrix val = tensor_to_matrix(read_tensor(o.val_logits));
      const auto val_labels = tensor_to_labels(read_tensor(o.val_labels));
      const TemperatureFit fit = temperature_scale(val, val_labels);
      temperature = fit.temperature;
      log << "temperature=" << format_double(temperature) << (fit.clamped ? " (clamped)" : "")
          << '\n';
    } else {
      throw Error(ErrorCode::InvalidArgument,
                  "softmax baseline needs --val-logits and --val-labels, or --temperature");
    }
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      const Vector p = softmax(logits.row(i), temperature);
      const int k = argmax(p);
      confidence.push_back(p[static_cast<std::size_t>(k)]);
      correct.push_back(k == labels[i]);
    }
  }
  const CalibrationReport report = ece(confidence, correct, o.bins);
  auto out = open_output(o.out);
  write_calibration_csv(report, out);
  log << "ece=" << format_double(report.ece) << '\n';
  return report;
}

RangeImage cmd_project(const ProjectOptions& o, std::ostream& log) {
  PointCloud cloud = read_kitti_scan(o.scan);
  LabelMap map;
  if (!o.labels.empty()) {
    if (o.label_map.empty()) throw Error(ErrorCode::InvalidArgument, "--labels needs --label-map");
    map = read_label_map(o.label_map);
    attach_labels(cloud, remap_labels(read_kitti_labels(o.labels, cloud.raw_count), map));
  }
  RangeImage img = spherical_project(cloud, o.geometry);
  const std::string& p = o.out_prefix;
  ensure_parent(p + ".x.tensor");
  write_tensor(p + ".x.tensor", image_channel(img, img.x));
  write_tensor(p + ".y.tensor", image_channel(img, img.y));
  write_tensor(p + ".z.tensor", image_channel(img, img.z));
  write_tensor(p + ".intensity.tensor", image_channel(img, img.intensity));
  write_tensor(p + ".range.tensor", image_channel(img, img.range));
  const std::vector<std::uint64_t> shape = {img.geometry.height, img.geometry.width};
  write_tensor(p + ".mask.tensor", Tensor::from_u8(shape, img.mask));
  if (img.labels) {
    // Negative sentinels keep their two's-complement bit pattern in the u32 image.
    std::vector<std::uint32_t> raw(img.labels->size());
    std::vector<std::uint8_t> ood(img.labels->size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = static_cast<std::uint32_t>((*img.labels)[i]);
      ood[i] = (*img.labels)[i] == kOodLabel ? 1 : 0;
    }
    write_tensor(p + ".labels.tensor", Tensor::from_u32(shape, raw));
    write_tensor(p + ".ood.tensor", Tensor::from_u8(shape, ood));
  }
  write_range_pgm(p + ".range.pgm", img);
  auto info = open_output(p + ".info.csv");
  CsvWriter csv(info);
  csv.row({"key", "value"});
  csv.row({"height", std::to_string(img.geometry.height)});
  csv.row({"width", std::to_string(img.geometry.width)});
  csv.row({"points", std::to_string(cloud.raw_count)});
  csv.row({"dropped_nonfinite", std::to_string(cloud.dropped_nonfinite)});
  csv.row({"dropped_projection", std::to_string(img.dropped)});
  csv.row({"valid_pixels",
           std::to_string(std::count(img.mask.begin(), img.mask.end(), std::uint8_t{1}))});
  csv.row({"empty_cloud", img.empty_cloud ? "true" : "false"});
  if (img.empty_cloud) log << "warning: " << o.scan << " contains no points\n";
  log << "projected " << cloud.points.size() << " points, dropped " << img.dropped << '\n';
  return img;
}

void cmd_synth(const SynthOptions& o, std::ostream& log) {
  std::string text = default_synth_spec_text();
  if (!o.spec.empty()) {
    std::ifstream in(o.spec, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + o.spec);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  const SynthSpec spec = parse_synth_spec(text);
  const std::uint64_t seed = o.seed.value_or(spec.seed.value_or(0));
  const SynthData data = synth_generate(spec, seed);

  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + o.out_dir + ": " + ec.message());
  const fs::path dir(o.out_dir);
  auto put = [&](const std::string& name, const Tensor& t) {
    write_tensor((dir / name).string(), t);
  };
  put("train_features.tensor", matrix_to_tensor(data.train.features));
  put("train_labels.tensor", labels_to_tensor(data.train.labels));
  put("test_features.tensor", matrix_to_tensor(data.test.features));
  put("test_labels.tensor", labels_to_tensor(data.test.labels));
  put("ood_features.tensor", matrix_to_tensor(data.ood.features));
  put("ood_labels.tensor", labels_to_tensor(data.ood.labels));

  // Evaluation split: in-distribution test rows followed by OOD rows.
  const std::size_t n_test = data.test.size();
  const std::size_t n_ood = data.ood.size();
  Matrix eval(n_test + n_ood, spec.dim);
  std::vector<std::int32_t> eval_labels;
  std::vector<std::uint8_t> truth;
  for (std::size_t i = 0; i < n_test; ++i) {
    std::ranges::copy(data.test.row(i), eval.row(i).begin());
    eval_labels.push_back(data.test.labels[i]);
    truth.push_back(0);
  }
  for (std::size_t i = 0; i < n_ood; ++i) {
    std::ranges::copy(data.ood.row(i), eval.row(n_test + i).begin());
    eval_labels.push_back(data.ood.labels[i]);
    truth.push_back(1);
  }
  put("eval_features.tensor", matrix_to_tensor(eval));
  put("eval_labels.tensor", labels_to_tensor(eval_labels));
  put("eval_truth.tensor", Tensor::from_u8({truth.size()}, truth));
  log << "wrote " << data.train.size() << " train, " << n_test << " test, " << n_ood
      << " OOD samples (seed " << seed << ") to " << o.out_dir << '\n';
}

namespace {

std::string output_dir_of(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

void write_echo(const CLI::App& sub, const std::string& dir) {
  std::ostringstream echo;
  std::istringstream lines(sub.config_to_str(true, false));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line.ends_with("=\"\"") || line.ends_with("=''")) continue;
    echo << sub.get_name() << '.' << line << '\n';
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  const std::string path = (fs::path(dir) / (sub.get_name() + ".config.echo.toml")).string();
  auto out = open_output(path);
  out << "# rerun with: gmu --config " << path << ' ' << sub.get_name() << '\n' << echo.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature-space mixture uncertainty and out-of-distribution scoring"};
  app.set_config("--config", "", "Read options from a key=value file (e.g. a config echo)");
  app.require_subcommand(1);

  FitOptions fit;
  std::size_t fit_classes = 0;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the class-conditional mixture to labeled features");
  fit_cmd->add_option("--features", fit.features, "n x d feature tensor")->required();
  fit_cmd->add_option("--labels", fit.labels, "n class-id tensor")->required();
  fit_cmd->add_option("--out", fit.out, "Model file to write")->required();
  fit_cmd->add_option("--jitter-rel", fit.jitter_rel, "Diagonal loading relative to mean variance")
      ->capture_default_str();
  fit_cmd->add_option("--classes", fit_classes, "Class count (0: max label + 1)")
      ->capture_default_str();
  fit_cmd->add_option("--class-names", fit.class_names, "Comma-separated class names")
      ->delimiter(',');
  fit_cmd->add_option("--summary", fit.summary, "Fit summary CSV (default <out>.summary.csv)");

  ScoreOptions score;
  score.threads = default_thread_count();
  auto* score_cmd = app.add_subcommand("score", "Score features: uncertainty and OOD per sample");
  score_cmd->add_option("--model", score.model, "Model file from `fit`")->required();
  score_cmd->add_option("--features", score.features, "n x d feature tensor")->required();
  score_cmd->add_option("--out", score.out, "Report CSV to write")->required();
  score_cmd->add_option("--ensemble-size", score.ensemble_size, "Sampled mixtures T")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  score_cmd->add_option("--seed", score.seed, "Ensemble sampling seed")->capture_default_str();
  score_cmd->add_option("--alpha", score.alpha, "Upper-tail mass of the chi-square test")
      ->capture_default_str();
  score_cmd->add_option("--ensemble", score.ensemble_in, "Reuse a saved ensemble");
  score_cmd->add_option("--ensemble-out", score.ensemble_out,
                        "Where to save the sampled ensemble (default <out>.ensemble)");
  score_cmd->add_option("--threads", score.threads, "Worker cap (env GMU_THREADS)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  EvalOodOptions eval_ood;
  auto* ood_cmd = app.add_subcommand("eval-ood", "Confusion matrix and F1 of the OOD flags");
  ood_cmd->add_option("--report", eval_ood.report, "Report CSV from `score`")->required();
  ood_cmd->add_option("--truth", eval_ood.truth, "Rank-1 tensor, nonzero = OOD")->required();
  ood_cmd->add_option("--out", eval_ood.out, "Metrics CSV to write")->required();

  EvalCalibrationOptions calib;
  double calib_temperature = 0.0;
  auto* cal_cmd = app.add_subcommand("eval-calibration", "Expected calibration error and bins");
  cal_cmd->add_option("--baseline", calib.baseline, "responsibility or softmax")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, CalibrationBaseline>{
              {"responsibility", CalibrationBaseline::responsibility},
              {"softmax", CalibrationBaseline::softmax}},
          CLI::ignore_case))
      ->capture_default_str();
  cal_cmd->add_option("--report", calib.report, "Report CSV (responsibility baseline)");
  cal_cmd->add_option("--logits", calib.logits, "n x C logit tensor (softmax baseline)");
  cal_cmd->add_option("--labels", calib.labels, "Ground-truth class ids")->required();
  cal_cmd->add_option("--val-logits", calib.val_logits, "Validation logits for temperature fit");
  cal_cmd->add_option("--val-labels", calib.val_labels, "Validation labels for temperature fit");
  cal_cmd->add_option("--temperature", calib_temperature, "Fixed temperature (skips the fit)")
      ->check(CLI::PositiveNumber);
  cal_cmd->add_option("--bins", calib.bins, "Equal-width bins")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cal_cmd->add_option("--out", calib.out, "Bin CSV to write")->required();

  ProjectOptions project;
  std::string geometry = "64x2048";
  auto* proj_cmd = app.add_subcommand("project", "Spherical range-view projection of a scan");
  proj_cmd->add_option("--scan", project.scan, "Scan .bin file")->required();
  proj_cmd->add_option("--labels", project.labels, "Matching .label file");
  proj_cmd->add_option("--label-map", project.label_map, "CSV raw_id,train_id,name");
  proj_cmd->add_option("--out-prefix", project.out_prefix, "Output path prefix")->required();
  proj_cmd->add_option("--geometry", geometry, "HEIGHTxWIDTH")->capture_default_str();
  proj_cmd->add_option("--fov-up", project.geometry.fov_up_deg, "Upper field of view, degrees")
      ->capture_default_str();
  proj_cmd->add_option("--fov-down", project.geometry.fov_down_deg, "Lower field of view, degrees")
      ->capture_default_str();

  SynthOptions synth;
  std::uint64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled feature dataset");
  synth_cmd->add_option("--spec", synth.spec, "Spec file (default: bundled three-class spec)");
  auto* seed_opt = synth_cmd->add_option("--seed", synth_seed, "Generation seed");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Directory for the tensors")->required();

  std::vector<const char*> argv = {"gmu"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitDataError;
  }

  try {
    const CLI::App* ran = nullptr;
    std::string echo_dir;
    if (fit_cmd->parsed()) {
      if (fit_classes > 0) fit.classes = fit_classes;
      cmd_fit(fit, out);
      ran = fit_cmd;
      echo_dir = output_dir_of(fit.out);
    } else if (score_cmd->parsed()) {
      cmd_score(score, out);
      ran = score_cmd;
      echo_dir = output_dir_of(score.out);
    } else if (ood_cmd->parsed()) {
      cmd_eval_ood(eval_ood, out);
      ran = ood_cmd;
      echo_dir = output_dir_of(eval_ood.out);
    } else if (cal_cmd->parsed()) {
      if (calib_temperature > 0.0) calib.temperature = calib_temperature;
      cmd_eval_calibration(calib, out);
      ran = cal_cmd;
      echo_dir = output_dir_of(calib.out);
    } else if (proj_cmd->parsed()) {
      unsigned long h = 0, w = 0;
      char x = 0;
      std::istringstream gs(geometry);
      if (!(gs >> h >> x >> w) || (x != 'x' && x != 'X') || h == 0 || w == 0 || !gs.eof()) {
        throw Error(ErrorCode::InvalidArgument, "--geometry must look like 64x2048");
      }
      project.geometry.height = h;
      project.geometry.width = w;
      cmd_project(project, out);
      ran = proj_cmd;
      echo_dir = output_dir_of(project.out_prefix);
    } else if (synth_cmd->parsed()) {
      if (seed_opt->count() > 0) synth.seed = synth_seed;
      cmd_synth(synth, out);
      ran = synth_cmd;
      echo_dir = synth.out_dir;
    }
    if (ran) write_echo(*ran, echo_dir);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace gmu::cli
