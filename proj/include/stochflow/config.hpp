#pragma once

#include "stochflow/coeffs.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stochflow {

struct FamilySpec {
  std::string name;
  std::vector<double> params;
  int dim = 1;

  bool operator==(const FamilySpec&) const = default;
};

struct JumpSpec {
  std::string name;
  std::vector<double> params;

  bool operator==(const JumpSpec&) const = default;
};

/// Fully validated experiment description. Defaults are listed in README.md.
struct ExperimentConfig {
  std::string kind;  // simulate | invert | spde | spde_bar | partition | limit | moments | assumptions
  FamilySpec family;
  std::optional<JumpSpec> jump;
  std::vector<MarkAtom> atoms;
  double s = 0.0;
  double t_end = 1.0;
  int base_steps = 100;
  std::vector<double> lower;  // empty means −1 per axis
  std::vector<double> upper;  // empty means +1 per axis
  double grid_step = 0.1;
  double epsilon = 1.0;
  double beta_prime = 1.5;
  double p = 2.0;
  int paths = 1;
  std::uint64_t seed = 0;
  double tol = 0.0;  // 0 selects the scheme default
  std::string scheme = "euler";
  std::string output = "out";
  Regularity regularity;
  std::string perturbation = "drift_shift";  // limit: drift_shift | sigma_scale
  std::vector<int> ns{1, 2, 4, 8, 16};
  std::vector<double> x;  // partition: expansion point; empty means the origin
  std::vector<int> partition_sizes{4, 16, 64};
  double fd_step = 1e-3;
  int quad_order = 8;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates a YAML document; throws ConfigError naming the key path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// YAML emitting every field; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace stochflow
