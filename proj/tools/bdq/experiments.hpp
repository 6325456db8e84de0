#pragma once

#include <string>
#include <vector>

#include "bdq/config.hpp"
#include "bdq/manifest.hpp"

namespace bdq::cli {

/// Runs the experiment named in the config; returns the exit code
/// (0 all checks pass, 1 check failures).
int run_experiment(const Config& config,
                   const std::filesystem::path& out_override);

/// Parses and validates the config for the named experiment without
/// executing it.
void validate_experiment_config(const Config& config);

std::vector<std::string> experiment_names();

/// `bdq report`: merge manifests from run directories.
int report_runs(const std::vector<std::filesystem::path>& dirs);

}  // namespace bdq::cli
