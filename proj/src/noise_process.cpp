#include "sigman/noise_process.hpp"

#include "sigman/error.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

namespace sigman {

OUParams::OUParams(double b_mhz, double tau_c_us, double dt_us)
    : b_(b_mhz), tau_c_(tau_c_us), dt_(dt_us) {
    if (!(b_ >= 0.0) || !std::isfinite(b_)) {
        throw ParameterError("OU amplitude b must be finite and >= 0, got " + std::to_string(b_));
    }
    if (!(tau_c_ > 0.0) || !std::isfinite(tau_c_)) {
        throw ParameterError("OU correlation time tau_c must be > 0, got " + std::to_string(tau_c_));
    }
    if (!(dt_ > 0.0) || dt_ > tau_c_ / 10.0) {
        throw ParameterError(fmt::format("OU step dt={} must satisfy 0 < dt <= tau_c/10 (tau_c={})",
                                         dt_, tau_c_));
    }
    decay_ = std::exp(-dt_ / tau_c_);
    kick_ = b_ * std::sqrt(-std::expm1(-2.0 * dt_ / tau_c_));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

Rng make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

void fill_ou_samples(const OUParams& params, std::size_t steps, Rng& rng, std::vector<double>& out) {
    if (steps < 1) throw ParameterError("OU trajectory needs at least one step");
    out.resize(steps);
    std::normal_distribution<double> normal(0.0, 1.0);
    double delta = params.b_mhz() * normal(rng);
    out[0] = delta;
    for (std::size_t i = 1; i < steps; ++i) {
        delta = ou_update(delta, params, normal(rng));
        out[i] = delta;
    }
}

NoiseTrajectory ou_trajectory(const OUParams& params, std::size_t steps, std::uint64_t seed) {
    NoiseTrajectory traj{{}, params, seed};
    auto rng = make_rng(seed);
    fill_ou_samples(params, steps, rng, traj.samples);
    return traj;
}

NoiseStats empirical_stats(const std::vector<double>& x, std::size_t max_lag) {
    if (x.size() < 2 || x.size() < 100 * max_lag) {
        throw ParameterError(fmt::format(
            "empirical_stats: {} samples is too short for max_lag={} (need >= 100*max_lag)",
            x.size(), max_lag));
    }
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;

    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);

    NoiseStats s;
    s.mean = mean;
    s.variance = ss / (n - 1.0);
    if (ss == 0.0) return s;

    s.autocorrelation_defined = true;
    s.autocorrelation.resize(max_lag + 1);
    s.autocorrelation[0] = 1.0;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < x.size(); ++i) c += (x[i] - mean) * (x[i + lag] - mean);
        s.autocorrelation[lag] = c / ss;
    }
    return s;
}

NoiseStats empirical_stats(const NoiseTrajectory& traj, std::size_t max_lag) {
    return empirical_stats(traj.samples, max_lag);
}

double calibrate_b_for_t2(double t2_target_us, DecayRegime regime) {
    if (!(t2_target_us > 0.0) || !std::isfinite(t2_target_us)) {
        throw ParameterError("calibrate_b_for_t2: target T2* must be > 0, got " +
                             std::to_string(t2_target_us));
    }
    switch (regime) {
    case DecayRegime::QuasiStatic:
        // <cos(2 pi delta t)> over N(0, b^2) is exp(-(2 pi b t)^2 / 2).
        return std::numbers::sqrt2 / (2.0 * std::numbers::pi * t2_target_us);
    }
    throw ParameterError("calibrate_b_for_t2: unsupported regime");
}

void write_trajectory_csv(std::ostream& os, const NoiseTrajectory& traj) {
    os << "step,time_us,delta_MHz\n";
    const double dt = traj.params.dt_us();
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
        fmt::print(os, "{},{},{}\n", i, static_cast<double>(i) * dt, traj.samples[i]);
    }
}

}  // namespace sigman
