#include "gmu/synth.hpp"

#include <cmath>
#include <sstream>

#include "gmu/error.hpp"
#include "gmu/random.hpp"

namespace gmu {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<double> parse_numbers(std::string s, int line) {
  for (char& ch : s)
    if (ch == ',' || ch == '[' || ch == ']' || ch == ';') ch = ' ';
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidSpec, "line " + std::to_string(line) + ": bad number '" + tok + "'");
    }
  }
  return out;
}

std::uint64_t parse_count(const std::string& s, int line) {
  const auto v = parse_numbers(s, line);
  if (v.size() != 1 || v[0] < 0 || v[0] != std::floor(v[0])) {
    throw Error(ErrorCode::InvalidSpec, "line " + std::to_string(line) + ": expected a count");
  }
  return static_cast<std::uint64_t>(v[0]);
}

FeatureSet draw_split(const SynthSpec& spec, std::size_t count_of(const SynthClass&),
                      std::uint64_t seed, std::uint64_t split,
                      const std::vector<Vector>& centers) {
  std::size_t total = 0;
  for (const auto& c : spec.classes) total += count_of(c);
  FeatureSet fs;
  fs.features = Matrix(total, spec.dim);
  fs.labels.reserve(total);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const SynthClass& cls = spec.classes[c];
    const SpdFactor factor = cholesky(cls.cov);
    RngStream rng(seed, (static_cast<std::uint64_t>(c) << 8) | split);
    for (std::size_t i = 0; i < count_of(cls); ++i, ++row) {
      const Vector x = sample_gaussian(centers[c], factor, rng);
      std::copy(x.begin(), x.end(), fs.features.row(row).begin());
      fs.labels.push_back(static_cast<std::int32_t>(c));
    }
  }
  return fs;
}

}  // namespace

void SynthSpec::validate() const {
  if (dim == 0) throw Error(ErrorCode::InvalidSpec, "dim must be positive");
  if (classes.empty()) throw Error(ErrorCode::InvalidSpec, "spec declares no classes");
  if (!(displacement >= 0.0) || !std::isfinite(displacement)) {
    throw Error(ErrorCode::InvalidSpec, "displacement must be finite and nonnegative");
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    const std::string who = "class " + std::to_string(c);
    if (cls.mean.size() != dim) throw Error(ErrorCode::InvalidSpec, who + ": mean has wrong length");
    if (cls.cov.rows() != dim || cls.cov.cols() != dim) {
      throw Error(ErrorCode::InvalidSpec, who + ": covariance has wrong shape");
    }
    if (cls.train < 2) throw Error(ErrorCode::InvalidSpec, who + ": train count must be >= 2");
    try {
      (void)cholesky(cls.cov);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidSpec, who + ": covariance is not SPD (" + e.what() + ")");
    }
  }
}

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  SynthClass* current = nullptr;
  std::vector<std::pair<std::vector<double>, bool>> pending_cov;  // values, is_diagonal
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s == "[class]" || s == "[[class]]") {
      spec.classes.emplace_back();
      pending_cov.emplace_back();
      current = &spec.classes.back();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidSpec, "line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!current) {
      if (key == "dim") {
        spec.dim = parse_count(value, line);
      } else if (key == "displacement") {
        const auto v = parse_numbers(value, line);
        if (v.size() != 1) throw Error(ErrorCode::InvalidSpec, "displacement takes one number");
        spec.displacement = v[0];
      } else if (key == "seed") {
        spec.seed = parse_count(value, line);
      } else {
        throw Error(ErrorCode::InvalidSpec, "line " + std::to_string(line) + ": unknown key " + key);
      }
      continue;
    }
    if (key == "name") {
      current->name = unquote(value);
    } else if (key == "mean") {
      current->mean = parse_numbers(value, line);
    } else if (key == "cov") {
      pending_cov.back() = {parse_numbers(value, line), false};
    } else if (key == "var") {
      pending_cov.back() = {parse_numbers(value, line), true};
    } else if (key == "train") {
      current->train = parse_count(value, line);
    } else if (key == "test") {
      current->test = parse_count(value, line);
    } else if (key == "ood") {
      current->ood = parse_count(value, line);
    } else {
      throw Error(ErrorCode::InvalidSpec, "line " + std::to_string(line) + ": unknown key " + key);
    }
  }

  const std::size_t d = spec.dim;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    auto& [values, diagonal] = pending_cov[c];
    if (values.empty()) {
      spec.classes[c].cov = Matrix::identity(d);
    } else if (diagonal) {
      if (values.size() != d) throw Error(ErrorCode::InvalidSpec, "var needs dim entries");
      spec.classes[c].cov = Matrix::diagonal(values);
    } else {
      if (values.size() != d * d) throw Error(ErrorCode::InvalidSpec, "cov needs dim*dim entries");
      spec.classes[c].cov = Matrix(d, d, std::move(values));
    }
  }
  spec.validate();
  return spec;
}

const std::string& default_synth_spec_text() {
  static const std::string text = R"(# Three well-separated classes in four dimensions.
dim = 4
displacement = 10

[class]
name = road
mean = 0, 0, 0, 0
var = 1, 1, 1, 1
train = 2000
test = 500
ood = 100

[class]
name = vegetation
mean = 12, 0, 0, 0
cov = 2, 0.5, 0, 0,  0.5, 1, 0, 0,  0, 0, 1, 0,  0, 0, 0, 1
train = 2000
test = 500
ood = 100

[class]
name = car
mean = 0, 12, 0, 0
var = 1, 2, 1, 0.5
train = 1000
test = 250
ood = 50
)";
  return text;
}

double largest_eigenvalue(const Matrix& spd) {
  const std::size_t d = spd.rows();
  Vector v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Vector w(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) w[i] += spd(i, j) * v[j];
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / norm;
    if (std::abs(norm - lambda) <= 1e-14 * norm) {
      lambda = norm;
      break;
    }
    lambda = norm;
  }
  return lambda;
}

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<Vector> centers;
  std::vector<Vector> displaced;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const SynthClass& cls = spec.classes[c];
    centers.push_back(cls.mean);
    RngStream dir_rng(seed, (static_cast<std::uint64_t>(c) << 8) | 3u);
    Vector dir(spec.dim);
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& v : dir) v = dir_rng.standard_normal();
      norm = 0.0;
      for (double v : dir) norm += v * v;
      norm = std::sqrt(norm);
    }
    const double shift = spec.displacement * std::sqrt(largest_eigenvalue(cls.cov)) / norm;
    Vector center = cls.mean;
    for (std::size_t k = 0; k < spec.dim; ++k) center[k] += shift * dir[k];
    displaced.push_back(std::move(center));
  }
  SynthData data;
  data.train = draw_split(spec, [](const SynthClass& c) { return c.train; }, seed, 0, centers);
  data.test = draw_split(spec, [](const SynthClass& c) { return c.test; }, seed, 1, centers);
  data.ood = draw_split(spec, [](const SynthClass& c) { return c.ood; }, seed, 2, displaced);
  return data;
}

}  // namespace gmu
