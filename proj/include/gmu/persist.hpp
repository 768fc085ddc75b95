#pragma once

#include <iosfwd>
#include <string>

#include "gmu/ensemble.hpp"
#include "gmu/gmm.hpp"

namespace gmu {

// Model and ensemble files start with a short text header (magic line,
// key=value pairs, "end") followed by tensor payloads. All doubles are
// stored as f64 so a round trip reproduces every score bit for bit.

inline constexpr int kModelFormatVersion = 1;

void save_model(std::ostream& os, const GmmModel& model);
GmmModel load_model(std::istream& is);
void save_model(const std::string& path, const GmmModel& model);
GmmModel load_model(const std::string& path);

void save_ensemble(std::ostream& os, const GmmEnsemble& ensemble);
GmmEnsemble load_ensemble(std::istream& is);
void save_ensemble(const std::string& path, const GmmEnsemble& ensemble);
GmmEnsemble load_ensemble(const std::string& path);

}  // namespace gmu
