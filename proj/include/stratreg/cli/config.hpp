#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stratreg/model.hpp"
#include "stratreg/solver.hpp"

namespace stratreg::cli {

struct RawEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct RawSection {
  std::string name;
  int line = 0;
  std::vector<RawEntry> entries;
};

/// Sections of `key = value` lines. Throws Error(Config) with a line number.
std::vector<RawSection> parse_sections(std::string_view text);

struct SweepSpec {
  std::string family = "identical";  // identical | heterogeneous | polynomial | cosh
  std::vector<int> n;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<std::pair<double, double>> pairs;  // (p_min, p_max)
};

struct PoaSpec {
  std::vector<int> n;
  std::vector<double> p;
  std::vector<double> q;
};

struct OlsSpec {
  std::string family = "counterexample";  // counterexample | config
  std::vector<int> n{9, 99, 999};
  double p = 3.0;
  bool exact = true;
  int samples = 100000;
};

struct EquivalenceSpec {
  double epsilon = 0.25;
  int trials = 50;
};

struct SimulateSpec {
  std::optional<std::vector<double>> beta;
  int trials = 100000;
  std::optional<double> constant_precision;  // otherwise the equilibrium profile
};

struct GameConfig {
  std::optional<AttributeSpace> space;  // X = {1} when absent
  std::optional<PlayerPopulation> population;
  Scalarization scalarization = Scalarization::trace();
  SolverOptions solver;
  std::optional<SweepSpec> sweep;
  std::optional<PoaSpec> poa;
  OlsSpec ols;
  EquivalenceSpec equivalence;
  SimulateSpec simulate;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;

  const AttributeSpace& attribute_space() const;
  /// Throws Error(Config) when the config has no [population].
  const PlayerPopulation& players() const;
};

/// Throws Error(Config) with "line N: ..." messages; model validation errors
/// raised while building objects keep their own codes.
GameConfig parse_config(std::string_view text);

/// Cost spec: `linear A`, `monomial P`, `polynomial C:D ...`, `cosh`.
ProvisionCost parse_cost(std::string_view spec, int line = 0);

/// Numbers separated by blanks or commas, or an integer range `a..b`.
std::vector<double> parse_numbers(std::string_view text, int line = 0);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace stratreg::cli
