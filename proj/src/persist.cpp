#include "gmu/persist.hpp"

#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "gmu/csv.hpp"
#include "gmu/error.hpp"
#include "gmu/tensor.hpp"

namespace gmu {
namespace {

constexpr const char* kModelMagic = "GMUMODEL";
constexpr const char* kEnsembleMagic = "GMUENSEMBLE";

using Header = std::map<std::string, std::string>;

void write_header(std::ostream& os, const char* magic, const Header& fields,
                  const std::vector<std::string>& names) {
  os << magic << '\n' << "version=" << kModelFormatVersion << '\n';
  for (const auto& [k, v] : fields) os << k << '=' << v << '\n';
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c].find_first_of("\r\n") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "class names may not contain line breaks");
    }
    os << "name." << c << '=' << names[c] << '\n';
  }
  os << "end\n";
}

Header read_header(std::istream& is, const char* magic) {
  std::string line;
  if (!std::getline(is, line) || line != magic) {
    throw Error(ErrorCode::BadMagic, std::string("expected a ") + magic + " file");
  }
  Header h;
  while (std::getline(is, line)) {
    if (line == "end") {
      auto it = h.find("version");
      if (it == h.end()) throw Error(ErrorCode::CorruptPayload, "header lacks a version");
      if (it->second != std::to_string(kModelFormatVersion)) {
        throw Error(ErrorCode::VersionMismatch, "file version " + it->second + ", reader expects " +
                                                    std::to_string(kModelFormatVersion));
      }
      return h;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::CorruptPayload, "bad header line: " + line);
    h[line.substr(0, eq)] = line.substr(eq + 1);
  }
  throw Error(ErrorCode::CorruptPayload, "header is not terminated");
}

std::uint64_t header_uint(const Header& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw Error(ErrorCode::CorruptPayload, "header lacks " + key);
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::CorruptPayload, "bad value for " + key);
  }
}

double header_double(const Header& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw Error(ErrorCode::CorruptPayload, "header lacks " + key);
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0') {
    throw Error(ErrorCode::CorruptPayload, "bad value for " + key);
  }
  return v;
}

std::vector<std::string> header_names(const Header& h, std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    auto it = h.find("name." + std::to_string(c));
    if (it == h.end()) {
      if (c == 0) return {};
      throw Error(ErrorCode::CorruptPayload, "class names are incomplete");
    }
    names.push_back(it->second);
  }
  return names;
}

Tensor read_payload(std::istream& is, DType dtype, const std::vector<std::uint64_t>& shape,
                    const char* what) {
  Tensor t;
  try {
    t = read_tensor(is);
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptPayload, std::string(what) + ": " + e.what());
  }
  if (t.dtype() != dtype || t.shape() != shape) {
    throw Error(ErrorCode::CorruptPayload, std::string(what) + " has an unexpected shape");
  }
  return t;
}

struct ComponentArrays {
  std::vector<double> means, covs, jitters;
};

void append_components(const GmmModel& m, ComponentArrays& out) {
  for (const auto& comp : m.components) {
    out.means.insert(out.means.end(), comp.mu.begin(), comp.mu.end());
    auto s = comp.sigma.values();
    out.covs.insert(out.covs.end(), s.begin(), s.end());
    out.jitters.push_back(comp.jitter);
  }
}

std::vector<ClassComponent> rebuild_components(std::size_t d, std::size_t classes,
                                               const double* means, const double* covs,
                                               const double* jitters,
                                               const std::vector<double>& log_pi,
                                               const std::vector<std::uint32_t>& counts) {
  std::vector<ClassComponent> comps;
  comps.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    Vector mu(means + c * d, means + (c + 1) * d);
    Matrix sigma(d, d, std::vector<double>(covs + c * d * d, covs + (c + 1) * d * d));
    try {
      comps.push_back(make_component(static_cast<int>(c), std::move(mu), std::move(sigma),
                                     log_pi[c], counts[c], jitters[c]));
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptPayload, "stored covariance does not factorize: " +
                                                 std::string(e.what()));
    }
  }
  return comps;
}

std::vector<std::uint32_t> counts_of(const GmmModel& m) {
  std::vector<std::uint32_t> counts;
  for (const auto& comp : m.components) counts.push_back(static_cast<std::uint32_t>(comp.count));
  return counts;
}

std::vector<double> log_pi_of(const GmmModel& m) {
  std::vector<double> v;
  for (const auto& comp : m.components) v.push_back(comp.log_pi);
  return v;
}

}  // namespace

void save_model(std::ostream& os, const GmmModel& model) {
  model.validate();
  const std::uint64_t d = model.d;
  const std::uint64_t c = model.num_classes;
  write_header(os, kModelMagic,
               {{"d", std::to_string(d)},
                {"classes", std::to_string(c)},
                {"jitter_rel", format_double(model.jitter_rel)}},
               model.class_names);
  ComponentArrays arrays;
  append_components(model, arrays);
  write_tensor(os, Tensor::from_f64({c, d}, arrays.means));
  write_tensor(os, Tensor::from_f64({c, d, d}, arrays.covs));
  write_tensor(os, Tensor::from_f64({c}, log_pi_of(model)));
  write_tensor(os, Tensor::from_u32({c}, counts_of(model)));
  write_tensor(os, Tensor::from_f64({c}, arrays.jitters));
}

GmmModel load_model(std::istream& is) {
  const Header h = read_header(is, kModelMagic);
  GmmModel m;
  m.d = header_uint(h, "d");
  m.num_classes = header_uint(h, "classes");
  m.jitter_rel = header_double(h, "jitter_rel");
  m.class_names = header_names(h, m.num_classes);
  const std::uint64_t d = m.d;
  const std::uint64_t c = m.num_classes;
  const auto means = read_payload(is, DType::f64, {c, d}, "means").to_f64();
  const auto covs = read_payload(is, DType::f64, {c, d, d}, "covariances").to_f64();
  const auto log_pi = read_payload(is, DType::f64, {c}, "log priors").to_f64();
  const auto counts = read_payload(is, DType::u32, {c}, "counts").as_u32();
  const auto jitters = read_payload(is, DType::f64, {c}, "jitters").to_f64();
  m.components =
      rebuild_components(m.d, m.num_classes, means.data(), covs.data(), jitters.data(), log_pi,
                         counts);
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptPayload, e.what());
  }
  return m;
}

void save_ensemble(std::ostream& os, const GmmEnsemble& ensemble) {
  if (ensemble.models.empty()) throw Error(ErrorCode::EmptyInput, "ensemble has no members");
  const GmmModel& first = ensemble.models.front();
  check_compatible(first, ensemble);
  const std::uint64_t d = first.d;
  const std::uint64_t c = first.num_classes;
  const std::uint64_t t = ensemble.size();
  write_header(os, kEnsembleMagic,
               {{"d", std::to_string(d)},
                {"classes", std::to_string(c)},
                {"members", std::to_string(t)},
                {"seed", std::to_string(ensemble.seed)}},
               first.class_names);
  ComponentArrays arrays;
  for (const auto& m : ensemble.models) append_components(m, arrays);
  write_tensor(os, Tensor::from_f64({c}, log_pi_of(first)));
  write_tensor(os, Tensor::from_u32({c}, counts_of(first)));
  write_tensor(os, Tensor::from_f64({t, c, d}, arrays.means));
  write_tensor(os, Tensor::from_f64({t, c, d, d}, arrays.covs));
  write_tensor(os, Tensor::from_f64({t, c}, arrays.jitters));
}

GmmEnsemble load_ensemble(std::istream& is) {
  const Header h = read_header(is, kEnsembleMagic);
  const std::uint64_t d = header_uint(h, "d");
  const std::uint64_t c = header_uint(h, "classes");
  const std::uint64_t t = header_uint(h, "members");
  GmmEnsemble ens;
  ens.seed = header_uint(h, "seed");
  const auto names = header_names(h, c);
  const auto log_pi = read_payload(is, DType::f64, {c}, "log priors").to_f64();
  const auto counts = read_payload(is, DType::u32, {c}, "counts").as_u32();
  const auto means = read_payload(is, DType::f64, {t, c, d}, "means").to_f64();
  const auto covs = read_payload(is, DType::f64, {t, c, d, d}, "covariances").to_f64();
  const auto jitters = read_payload(is, DType::f64, {t, c}, "jitters").to_f64();
  ens.models.resize(t);
  for (std::size_t k = 0; k < t; ++k) {
    GmmModel& m = ens.models[k];
    m.d = d;
    m.num_classes = c;
    m.jitter_rel = 0.0;
    m.class_names = names;
    m.components = rebuild_components(d, c, means.data() + k * c * d, covs.data() + k * c * d * d,
                                      jitters.data() + k * c, log_pi, counts);
    try {
      m.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptPayload, e.what());
    }
  }
  return ens;
}

void save_model(const std::string& path, const GmmModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  save_model(out, model);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

GmmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return load_model(in);
}

void save_ensemble(const std::string& path, const GmmEnsemble& ensemble) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  save_ensemble(out, ensemble);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

GmmEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return load_ensemble(in);
}

}  // namespace gmu
