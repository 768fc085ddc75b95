#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmu/gmm.hpp"
#include "gmu/linalg.hpp"

namespace gmu {

struct SynthClass {
  std::string name;
  Vector mean;
  Matrix cov;
  std::size_t train = 0;
  std::size_t test = 0;
  std::size_t ood = 0;
};

/// Gaussian class clusters plus an out-of-distribution copy of each cluster
/// shifted by `displacement` times the square root of its largest
/// covariance eigenvalue along a seeded random direction.
struct SynthSpec {
  std::size_t dim = 0;
  double displacement = 10.0;
  std::optional<std::uint64_t> seed;
  std::vector<SynthClass> classes;

  void validate() const;
};

/// Parses the key = value format:
///
///   dim = 2
///   displacement = 10
///   seed = 7            # optional
///   [class]
///   name = road
///   mean = 3, 0
///   cov = 1, 0, 0, 1    # row-major d*d; or `var = 1, 1` for a diagonal
///   train = 1000
///   test = 500
///   ood = 200
SynthSpec parse_synth_spec(const std::string& text);

/// A small three-class spec used when the caller supplies none.
const std::string& default_synth_spec_text();

struct SynthData {
  FeatureSet train;
  FeatureSet test;
  FeatureSet ood;  // labels hold the class each point was displaced from
};

/// Deterministic per seed: every (class, split) draws from its own stream.
SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed);

/// Largest eigenvalue of an SPD matrix by power iteration.
double largest_eigenvalue(const Matrix& spd);

}  // namespace gmu
