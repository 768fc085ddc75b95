#include "gmu/report.hpp"

#include <cstdlib>
#include <fstream>

#include "gmu/csv.hpp"
#include "gmu/error.hpp"

namespace gmu {
namespace {

const char* bool_text(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& s, std::size_t row) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error(ErrorCode::CorruptPayload, "row " + std::to_string(row) + ": bad boolean '" + s + "'");
}

double parse_double(const std::string& s, std::size_t row) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') {
    throw Error(ErrorCode::CorruptPayload, "row " + std::to_string(row) + ": bad number '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, std::size_t row) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::CorruptPayload, "row " + std::to_string(row) + ": bad integer '" + s + "'");
}

}  // namespace

void write_report_csv(std::ostream& os, const std::vector<SampleReport>& reports) {
  CsvWriter csv(os);
  csv.row(report_columns());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    csv.row({std::to_string(i), std::to_string(r.predicted_class), format_double(r.epistemic),
             format_double(r.aleatoric), format_double(r.min_mahalanobis_sq),
             bool_text(r.is_ood), bool_text(r.aleatoric_valid), format_double(r.ddu_score),
             format_double(r.confidence), std::to_string(r.responsibility_class)});
  }
}

std::vector<SampleReport> read_report_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  if (t.header.empty()) throw Error(ErrorCode::EmptyInput, "report CSV is empty");
  const auto c_pred = t.column("predicted_class");
  const auto c_epi = t.column("epistemic");
  const auto c_ale = t.column("aleatoric");
  const auto c_d2 = t.column("min_d2");
  const auto c_ood = t.column("is_ood");
  const auto c_valid = t.column("aleatoric_valid");
  const auto c_ddu = t.column("ddu_score");
  const auto c_conf = t.column("confidence");
  const auto c_rc = t.column("responsibility_class");
  std::vector<SampleReport> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    SampleReport r;
    r.predicted_class = parse_int(row[c_pred], i + 1);
    r.epistemic = parse_double(row[c_epi], i + 1);
    r.aleatoric = parse_double(row[c_ale], i + 1);
    r.min_mahalanobis_sq = parse_double(row[c_d2], i + 1);
    r.is_ood = parse_bool(row[c_ood], i + 1);
    r.aleatoric_valid = parse_bool(row[c_valid], i + 1);
    r.ddu_score = parse_double(row[c_ddu], i + 1);
    r.confidence = parse_double(row[c_conf], i + 1);
    r.responsibility_class = parse_int(row[c_rc], i + 1);
    out.push_back(r);
  }
  return out;
}

std::vector<SampleReport> read_report_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_report_csv(in);
}

}  // namespace gmu
