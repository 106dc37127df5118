#include "sigman/presets.hpp"

#include "sigman/error.hpp"
#include "sigman/noise_process.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <numbers>

namespace sigman {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Quasi-static bath: correlation time far beyond the decay time.
NoiseSpec nonmarkovian_noise() {
    NoiseSpec n;
    n.b_mhz = calibrate_b_for_t2(kT2NonMarkovianUs);
    n.tau_c_us = 1e4 * kT2NonMarkovianUs;
    return n;
}

// Pure dephasing at rate 1/T: exp(-t/T) Ramsey decay.
NoiseSpec markovian_noise() {
    NoiseSpec n;
    n.gamma_phi_mhz = 1.0 / (kTwoPi * kT2MarkovianUs);
    return n;
}

// Weak pumping (Tp = 2 us) plus OU noise with tau_c comparable to the decay;
// the combined Ramsey decay fits to T ~ 0.81 us, r ~ 1.23.
NoiseSpec nearly_markovian_noise() {
    NoiseSpec n;
    n.gamma_pump_mhz = 1.0 / (kTwoPi * 1.0);
    n.b_mhz = 0.31;
    n.tau_c_us = 0.266;
    return n;
}

RunConfig base(const std::string& name, const std::string& scenario) {
    RunConfig c;
    c.name = name;
    c.scenario = scenario;
    c.output_dir = "out/" + name;
    return c;
}

RunConfig ramsey(const std::string& name, NoiseSpec noise, double t2, double dt, std::size_t n_traj) {
    RunConfig c = base(name, "ramsey");
    c.sequence.noise = noise;
    c.sequence.dt_us = dt;
    c.sequence.n_traj = n_traj;
    c.analysis.t2_ref_us = t2;
    return c;
}

RunConfig ramsey_nonmarkovian() {
    RunConfig c = ramsey("ramsey_nonmarkovian", nonmarkovian_noise(), kT2NonMarkovianUs, 0.1, 2000);
    c.analysis.fit_window_us = 44.0;
    c.analysis.fit_points = 55;
    return c;
}

RunConfig ramsey_strong_pumping() {
    NoiseSpec n = nonmarkovian_noise();
    n.gamma_pump_mhz = 2.0 / (kTwoPi * kT2MarkovianUs);  // transverse rate 1/0.81 us
    RunConfig c = ramsey("ramsey_strong_pumping", n, kT2MarkovianUs, 0.005, 2000);
    c.analysis.fit_window_us = 1.62;
    c.analysis.fit_points = 54;
    return c;
}

RunConfig ramsey_nearly_markovian() {
    RunConfig c = ramsey("ramsey_nearly_markovian", nearly_markovian_noise(), kT2MarkovianUs, 0.005, 2000);
    c.analysis.fit_window_us = 1.62;
    c.analysis.fit_points = 54;
    return c;
}

RunConfig fig4(const std::string& name, NoiseSpec noise, double t2, double dt, std::size_t n_traj) {
    RunConfig c = base(name, "accerr");
    c.sequence.noise = noise;
    c.sequence.drive_mhz = kFig4DriveMhz;
    c.sequence.dt_us = dt;
    c.sequence.n_traj = n_traj;
    c.analysis.t2_ref_us = t2;
    c.analysis.accerr_points = 50;
    c.analysis.t_norm_max = 1.0;
    return c;
}

RunConfig fig5(const std::string& name, NoiseSpec noise, double t2, double dt, std::size_t n_traj,
               std::vector<double> drives, double window, std::size_t points) {
    RunConfig c = base(name, "sweep");
    c.sequence.noise = noise;
    c.sequence.dt_us = dt;
    c.sequence.n_traj = n_traj;
    c.sequence.sigma_meas = 0.02;
    c.analysis.t2_ref_us = t2;
    c.analysis.drive_grid_mhz = std::move(drives);
    c.analysis.repeats = 10;
    c.analysis.fit_window_us = window;
    c.analysis.fit_points = points;
    return c;
}

RunConfig fig6(const std::string& name, NoiseSpec noise, std::size_t n_traj) {
    RunConfig c = base(name, "purity");
    c.sequence.noise = noise;
    c.sequence.drive_mhz = kFig6DriveMhz;
    c.sequence.dt_us = 5e-4;
    c.sequence.n_traj = n_traj;
    c.analysis.t2_ref_us = kT2MarkovianUs;
    c.analysis.purity_t_max_us = 0.1;
    c.analysis.purity_points = 50;
    c.analysis.purity_max_dp = 0.05;
    return c;
}

const std::map<std::string, std::function<RunConfig()>>& registry() {
    static const std::map<std::string, std::function<RunConfig()>> r{
        {"weights", [] { return base("weights", "weights"); }},
        {"convergence", [] { return base("convergence", "convergence"); }},
        {"ramsey_nonmarkovian", ramsey_nonmarkovian},
        {"ramsey_strong_pumping", ramsey_strong_pumping},
        {"ramsey_nearly_markovian", ramsey_nearly_markovian},
        {"scan_nearly_markovian",
         [] {
             RunConfig c = base("scan_nearly_markovian", "scan");
             c.sequence.noise = nearly_markovian_noise();
             c.sequence.dt_us = 0.005;
             c.sequence.n_traj = 500;
             c.analysis.t2_ref_us = kT2MarkovianUs;
             c.analysis.duration_us = 2.43;
             c.analysis.drive_grid_mhz = {0.0, 0.5, 1.0, kFig4DriveMhz};
             return c;
         }},
        {"sigma_nearly_markovian",
         [] {
             RunConfig c = base("sigma_nearly_markovian", "sigma");
             c.sequence.noise = nearly_markovian_noise();
             c.sequence.drive_mhz = kFig6DriveMhz;
             c.sequence.dt_us = 0.005;
             c.sequence.n_traj = 1000;
             c.analysis.t2_ref_us = kT2MarkovianUs;
             c.analysis.fit_window_us = 1.62;
             c.analysis.fit_points = 54;
             return c;
         }},
        {"fig4_nonmarkovian",
         [] { return fig4("fig4_nonmarkovian", nonmarkovian_noise(), kT2NonMarkovianUs, 0.0221, 200); }},
        {"fig4_nearly_markovian",
         [] { return fig4("fig4_nearly_markovian", nearly_markovian_noise(), kT2MarkovianUs, 0.0081, 1000); }},
        {"fig5_nonmarkovian",
         [] {
             return fig5("fig5_nonmarkovian", nonmarkovian_noise(), kT2NonMarkovianUs, 0.1, 200,
                         {0.0, 0.0005, 0.001, 0.0015, 0.002, 0.0025}, 44.0, 55);
         }},
        {"fig5_nearly_markovian",
         [] {
             return fig5("fig5_nearly_markovian", nearly_markovian_noise(), kT2MarkovianUs, 0.005, 200,
                         {0.0, 0.025, 0.05, 0.075, 0.1}, 1.62, 54);
         }},
        {"fig5_markovian",
         [] {
             return fig5("fig5_markovian", markovian_noise(), kT2MarkovianUs, 0.01, 1,
                         {0.0, 0.025, 0.05, 0.075, 0.1}, 1.62, 54);
         }},
        {"fig6_markovian", [] { return fig6("fig6_markovian", markovian_noise(), 1); }},
        {"fig6_nearly_markovian", [] { return fig6("fig6_nearly_markovian", nearly_markovian_noise(), 20000); }},
    };
    return r;
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [k, v] : registry()) names.push_back(k);
    return names;
}

RunConfig preset(const std::string& name) {
    const auto& r = registry();
    auto it = r.find(name);
    if (it == r.end()) throw ParameterError("unknown preset '" + name + "'");
    RunConfig c = it->second();
    c.validate();
    return c;
}

}  // namespace sigman
