#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace sigman {

/// Ornstein-Uhlenbeck detuning noise: stationary std b (cyclic MHz), correlation
/// time tau_c and step dt (both us). Requires b >= 0, tau_c > 0, 0 < dt <= tau_c/10.
class OUParams {
public:
    OUParams(double b_mhz, double tau_c_us, double dt_us);

    double b_mhz() const { return b_; }
    double tau_c_us() const { return tau_c_; }
    double dt_us() const { return dt_; }

    /// e^{-dt/tau_c}
    double decay() const { return decay_; }
    /// b * sqrt(1 - e^{-2 dt/tau_c})
    double kick() const { return kick_; }

private:
    double b_;
    double tau_c_;
    double dt_;
    double decay_;
    double kick_;
};

struct NoiseTrajectory {
    std::vector<double> samples;  // detuning per step, cyclic MHz
    OUParams params;
    std::uint64_t seed;
};

using Rng = std::mt19937_64;

/// Child seed for (master, stream, index). Mixing goes through std::seed_seq,
/// so the value depends only on the three integers and never on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

/// Engine seeded from a 64-bit seed via std::seed_seq.
Rng make_rng(std::uint64_t seed);

/// Exact one-step OU transition: next = current * e^{-dt/tau_c} + kick * eta.
inline double ou_update(double current, const OUParams& p, double eta) {
    return current * p.decay() + p.kick() * eta;
}

/// First sample drawn from the stationary law N(0, b^2), then exact updates.
NoiseTrajectory ou_trajectory(const OUParams& params, std::size_t steps, std::uint64_t seed);

/// Fills `out` (resized to `steps`) using `rng`; allocation-free variant for ensembles.
void fill_ou_samples(const OUParams& params, std::size_t steps, Rng& rng, std::vector<double>& out);

struct NoiseStats {
    double mean = 0.0;
    double variance = 0.0;
    std::vector<double> autocorrelation;  // lag 0..max_lag, 1 at lag 0
    bool autocorrelation_defined = false;  // false for zero-variance input
};

/// Unbiased sample mean/variance and the normalized autocorrelation.
/// Requires at least 100 * max_lag samples.
NoiseStats empirical_stats(const NoiseTrajectory& traj, std::size_t max_lag);
NoiseStats empirical_stats(const std::vector<double>& samples, std::size_t max_lag);

enum class DecayRegime { QuasiStatic };

/// Stationary amplitude giving a Gaussian free-induction decay exp(-(t/T2*)^2)
/// for frozen detuning: b = sqrt(2) / (2 pi T2*).
double calibrate_b_for_t2(double t2_target_us, DecayRegime regime = DecayRegime::QuasiStatic);

/// Columns: step,time_us,delta_MHz
void write_trajectory_csv(std::ostream& os, const NoiseTrajectory& traj);

}  // namespace sigman
