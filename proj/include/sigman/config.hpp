#pragma once

#include "sigman/estimation.hpp"
#include "sigman/liouville_lab.hpp"
#include "sigman/trajectory_sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sigman {

struct AnalysisConfig {
    double t2_ref_us = 1.0;
    double duration_us = 0.0;  // 0: derived from the fit window
    double fit_window_us = 2.0;
    std::size_t fit_points = 60;
    std::vector<double> drive_grid_mhz{0.0};
    int repeats = 10;
    SigmaModel sigma_model = SigmaModel::WeightConsistent;
    std::size_t accerr_points = 50;
    double t_norm_max = 1.0;
    double purity_max_dp = 0.05;
    double purity_t_max_us = 0.1;
    std::size_t purity_points = 50;
    std::vector<int> weight_orders{1, 2, 3};
};

struct ConvergenceConfig {
    std::vector<int> orders{2, 3};
    double x_min = 1e-3;
    double x_max = 0.1;
    std::size_t x_points = 12;
    double h_y = 0.7;          // H = h_y sigma_y / 2
    double gamma_phi = 0.3;    // rate of the sigma_z jump operator
    double gamma_pump = 0.0;   // rate of the sigma_+ jump operator
    Convention convention = Convention::Projection;

    ChannelSpec channel() const;
};

struct RunConfig {
    std::string scenario;
    std::string name;
    std::uint64_t master_seed = 42;
    unsigned workers = 1;
    std::string output_dir = "out";
    SequenceSpec sequence;
    AnalysisConfig analysis;
    ConvergenceConfig convergence;

    /// Throws ParameterError naming the offending field paths.
    void validate() const;
};

inline const std::vector<std::string>& scenarios() {
    static const std::vector<std::string> s{"weights", "ramsey",  "scan",   "sigma",
                                            "accerr",  "sweep",   "purity", "convergence"};
    return s;
}

/// Strict parse: unknown keys and type mismatches throw ParameterError.
/// Sequence and noise fields may also appear at top level.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig parse_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

std::string to_string(Convention c);
Convention parse_convention(const std::string& s);

}  // namespace sigman
