#pragma once

#include "sigman/noise_process.hpp"
#include "sigman/protocol_weights.hpp"
#include "sigman/quantum_core.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace sigman {

/// Incoherent environment: OU detuning noise plus Markovian pumping/dephasing.
struct NoiseSpec {
    double b_mhz = 0.0;
    double tau_c_us = 1.0e6;
    double gamma_pump_mhz = 0.0;
    double gamma_phi_mhz = 0.0;
};

/// Driven Ramsey protocol. The drive is a resonant rotation about +y; R_k is
/// read at t = k * tau1.
struct SequenceSpec {
    double drive_mhz = 0.0;
    double tau1_us = 0.1;
    int max_order = 3;
    NoiseSpec noise;
    double dt_us = 1e-3;
    std::size_t n_traj = 2000;
    std::size_t n_shots = 1;
    double sigma_meas = 0.0;
    std::uint64_t master_seed = 42;

    /// Throws ParameterError naming the offending fields.
    void validate() const;
    OUParams ou_params() const { return {noise.b_mhz, noise.tau_c_us, dt_us}; }
};

struct SignalSeries {
    std::vector<double> times_us;
    std::vector<double> mean_sx;
    std::vector<double> sem;
    bool with_measurement_noise = false;

    std::size_t size() const { return times_us.size(); }
};

struct TomographySeries {
    std::vector<double> times_us;
    std::vector<double> sx, sy, sz;
    std::vector<double> purity_loss;  // of the ensemble-averaged state
};

/// Ensemble averages of all three Bloch components on the step grid.
struct EnsembleRecord {
    std::vector<double> times_us;
    std::vector<Bloch> mean;
    std::vector<double> sem_x;
    std::size_t n_traj = 0;

    SignalSeries signal() const;
    TomographySeries tomography() const;
};

/// Number of integration steps covering `duration_us`.
std::size_t step_count(const SequenceSpec& spec, double duration_us);

/// Grid index of time t, which must be an integer multiple of dt.
std::size_t grid_index(const SequenceSpec& spec, double t_us);

/// Single trajectory from (1,0,0): per step a half dissipative step, the exact
/// rotation about (0, drive, delta_i), and another half dissipative step.
/// Returns steps + 1 states including t = 0.
std::vector<QubitState> run_trajectory(const SequenceSpec& spec, const NoiseTrajectory& noise,
                                       double duration_us);

/// Seed of trajectory `index` in the ensemble of `spec`.
std::uint64_t trajectory_seed(const SequenceSpec& spec, std::size_t index);

/// Full ensemble average. Trajectories run in fixed blocks merged in index
/// order, so the result is bit-identical for any worker count.
EnsembleRecord simulate_ensemble(const SequenceSpec& spec, double duration_us, unsigned workers = 1);

SignalSeries run_ensemble(const SequenceSpec& spec, double duration_us, unsigned workers = 1);

TomographySeries tomography(const SequenceSpec& spec, double duration_us, unsigned workers = 1);

/// Independent N(0, sigma_meas^2 / n_shots) per point, seeded from the spec.
SignalSeries add_measurement_noise(const SignalSeries& series, const SequenceSpec& spec);

/// R_0..R_order read from `series` at k * tau1, with sigma_n for n = 1..order.
FidelitySeries fidelities_at(const SignalSeries& series, const SequenceSpec& spec, double tau1_us,
                             int order);

/// Simulates up to max_order * tau1 (plus measurement noise when configured)
/// and extracts R_k and sigma_n.
FidelitySeries measure_rk(const SequenceSpec& spec, unsigned workers = 1);

/// Columns: time_us,mean_sx,sem
void write_signal_csv(std::ostream& os, const SignalSeries& s);
/// Columns: tau1_us,k,R_k,sigma2,sigma3,u_sigma2,u_sigma3
void write_fidelities_csv(std::ostream& os, const std::vector<FidelitySeries>& rows);
/// Columns: time_us,sx,sy,sz,purity_loss
void write_tomography_csv(std::ostream& os, const TomographySeries& t);

}  // namespace sigman
