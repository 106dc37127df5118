#pragma once

#include "sigman/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace sigman {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitRuntime = 3, kExitFitQuality = 4 };

struct RunReport {
    int exit_code = kExitOk;
    std::vector<std::string> outputs;   // file names inside the output directory
    std::vector<std::string> failures;
    double wall_time_s = 0.0;
};

/// Runs the configured scenario, writes config.json, the scenario CSVs and
/// manifest.json into config.output_dir, and prints a summary to `out`.
RunReport run_scenario(const RunConfig& config, std::ostream& out);

/// Library and compiler versions recorded in the manifest.
nlohmann::json version_info();

}  // namespace sigman
