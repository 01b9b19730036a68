#pragma once

#include "stochflow/coeffs.hpp"
#include "stochflow/config.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stochflow {

inline constexpr std::string_view kVersion = "0.1.0";

/// Family, optional jump part and regularity constants from a config.
CoefficientField build_field(const ExperimentConfig& config);
MarkMeasure build_measure(const ExperimentConfig& config);
Box build_box(const ExperimentConfig& config);

/// Runs one experiment and writes its CSV and manifest.json into `out_dir`.
/// CSV bytes depend on the config only, never on `workers`. Returns the
/// written file names.
std::vector<std::string> run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                        int workers = 1);

}  // namespace stochflow
