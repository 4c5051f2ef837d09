#pragma once

#include "fractal/fem.hpp"
#include "fractal/models.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flab {

/// Parse failure; `line` is 1-based, 0 when the error is not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

/// INI-style instance description. Sections: geometry, cantor, model, quadrature, run, fem, solver.
struct InstanceConfig {
  int version = 1;

  // [geometry]
  Regime regime = Regime::Sub;
  int d = 2;
  double p0 = 1.5;
  double gamma = -3.0;
  int m = 12;

  // [cantor]
  int box_m_max = 12;
  int law_samples = 200;

  // [model]
  ModelParams model;

  // [quadrature]
  int k_max = 40;
  int order = 8;

  // [run]
  std::uint64_t seed = 1;
  double kappa = 0.01;
  double meyers_delta = -1.0;
  int bumps = 20;
  int trace_points = 64;
  int chain_m = 8;

  // [fem]
  std::vector<int> levels{4, 5, 6};
  int grading_extra = 6;
  double grading_reach = 0.75;
  Space space = Space::NonconformingCR;
  std::vector<double> norm_exponents;  // empty selects p0 - 0.1 and p0 + 0.25

  // [solver]
  SolverConfig solver;

  Geometry geometry() const;
  Grading grading() const;
  std::vector<double> exponents() const;

  bool operator==(const InstanceConfig&) const = default;
};

/// Throws ConfigError on syntax errors, unknown sections or keys, duplicate keys and bad values.
InstanceConfig parse_config(const std::string& text);
/// Canonical text: every key in a fixed order, doubles with round-trip precision.
std::string serialize_config(const InstanceConfig& c);

Regime parse_regime(const std::string& s);
Family parse_family(const std::string& s);
Space parse_space(const std::string& s);

/// Theorem and finiteness windows for the configured instance.
std::vector<Verdict> validate_config(const InstanceConfig& c);

}  // namespace flab
