#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gmu/ood.hpp"

namespace gmu {

/// Column order of the per-sample report.
inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "index",  "predicted_class", "epistemic", "aleatoric",  "min_d2",
      "is_ood", "aleatoric_valid", "ddu_score", "confidence", "responsibility_class"};
  return cols;
}

void write_report_csv(std::ostream& os, const std::vector<SampleReport>& reports);

/// Reads back a report written by write_report_csv. Columns are looked up by
/// name, so extra columns are tolerated.
std::vector<SampleReport> read_report_csv(std::istream& is);
std::vector<SampleReport> read_report_csv(const std::string& path);

}  // namespace gmu
