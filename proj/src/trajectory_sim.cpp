#include "sigman/trajectory_sim.hpp"

#include "sigman/error.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

namespace sigman {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::uint64_t kTrajectoryStream = 0x7472616aULL;   // "traj"
constexpr std::uint64_t kMeasurementStream = 0x6d656173ULL;  // "meas"
constexpr std::size_t kBlockSize = 32;
constexpr std::size_t kWaveBlocks = 16;

// Running mean / M2 of a_x plus sums of a_y, a_z per grid point.
struct BlockAccumulator {
    std::size_t count = 0;
    std::vector<double> mean_x, m2_x, sum_y, sum_z;

    explicit BlockAccumulator(std::size_t points)
        : mean_x(points, 0.0), m2_x(points, 0.0), sum_y(points, 0.0), sum_z(points, 0.0) {}

    void add(const std::vector<Bloch>& traj) {
        ++count;
        const double n = static_cast<double>(count);
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const double x = traj[i].x();
            const double d = x - mean_x[i];
            mean_x[i] += d / n;
            m2_x[i] += d * (x - mean_x[i]);
            sum_y[i] += traj[i].y();
            sum_z[i] += traj[i].z();
        }
    }

    // Chan et al. pairwise merge; called in block order only.
    void merge(const BlockAccumulator& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(count), nb = static_cast<double>(o.count);
        const double n = na + nb;
        for (std::size_t i = 0; i < mean_x.size(); ++i) {
            const double d = o.mean_x[i] - mean_x[i];
            mean_x[i] += d * nb / n;
            m2_x[i] += o.m2_x[i] + d * d * na * nb / n;
            sum_y[i] += o.sum_y[i];
            sum_z[i] += o.sum_z[i];
        }
        count += o.count;
    }
};

void evolve_into(const SequenceSpec& spec, const std::vector<double>& delta, std::size_t steps,
                 std::vector<Bloch>& out) {
    out.resize(steps + 1);
    const detail::DissipationFactors half(spec.noise.gamma_pump_mhz, spec.noise.gamma_phi_mhz,
                                          0.5 * spec.dt_us);
    const double f = spec.drive_mhz;
    Bloch a(1.0, 0.0, 0.0);
    out[0] = a;
    for (std::size_t i = 0; i < steps; ++i) {
        half.apply(a);
        const double d = delta[i];
        const double omega = std::hypot(f, d);
        if (omega > 0.0) {
            const Eigen::Vector3d axis(0.0, f / omega, d / omega);
            const double angle = kTwoPi * omega * spec.dt_us;
            detail::rotate(a, axis, std::cos(angle), std::sin(angle));
        }
        half.apply(a);
        out[i + 1] = a;
    }
}

}  // namespace

void SequenceSpec::validate() const {
    if (!(tau1_us > 0.0)) throw ParameterError(fmt::format("sequence.tau1_us must be > 0, got {}", tau1_us));
    if (max_order < 1 || max_order > kMaxSigmaOrder) {
        throw ParameterError(fmt::format("sequence.max_order must lie in [1, {}], got {}",
                                         kMaxSigmaOrder, max_order));
    }
    if (!(drive_mhz >= 0.0)) throw ParameterError("sequence.drive_mhz must be >= 0");
    if (!(dt_us > 0.0)) throw ParameterError("sequence.dt_us must be > 0");
    if (n_traj < 1) throw ParameterError("sequence.n_traj must be >= 1");
    if (n_shots < 1) throw ParameterError("sequence.n_shots must be >= 1");
    if (!(sigma_meas >= 0.0)) throw ParameterError("sequence.sigma_meas must be >= 0");
    if (!(noise.b_mhz >= 0.0)) throw ParameterError("noise.b_mhz must be >= 0");
    if (!(noise.tau_c_us > 0.0)) throw ParameterError("noise.tau_c_us must be > 0");
    if (!(noise.gamma_pump_mhz >= 0.0)) throw ParameterError("noise.gamma_pump_mhz must be >= 0");
    if (!(noise.gamma_phi_mhz >= 0.0)) throw ParameterError("noise.gamma_phi_mhz must be >= 0");
    if (dt_us > noise.tau_c_us / 10.0) {
        throw ParameterError(fmt::format(
            "sequence.dt_us={} exceeds noise.tau_c_us/10={} (step must resolve the noise memory)",
            dt_us, noise.tau_c_us / 10.0));
    }
    if (drive_mhz > 0.0 && dt_us > 1.0 / (20.0 * drive_mhz)) {
        throw ParameterError(fmt::format(
            "sequence.dt_us={} exceeds 1/(20*sequence.drive_mhz)={}", dt_us, 1.0 / (20.0 * drive_mhz)));
    }
}

std::size_t step_count(const SequenceSpec& spec, double duration_us) {
    if (!(duration_us >= 0.0)) throw ParameterError("simulation duration must be >= 0");
    return static_cast<std::size_t>(std::ceil(duration_us / spec.dt_us - 1e-9));
}

std::size_t grid_index(const SequenceSpec& spec, double t_us) {
    const double r = t_us / spec.dt_us;
    const double k = std::round(r);
    if (k < 0.0 || std::abs(r - k) > 1e-6 * std::max(1.0, k)) {
        throw ParameterError(
            fmt::format("time {} us is not a multiple of sequence.dt_us={}", t_us, spec.dt_us));
    }
    return static_cast<std::size_t>(k);
}

std::vector<QubitState> run_trajectory(const SequenceSpec& spec, const NoiseTrajectory& noise,
                                       double duration_us) {
    spec.validate();
    const std::size_t steps = step_count(spec, duration_us);
    if (noise.samples.size() < steps) {
        throw ParameterError(fmt::format("noise trajectory has {} samples, {} steps requested",
                                         noise.samples.size(), steps));
    }
    if (std::abs(noise.params.dt_us() - spec.dt_us) > 1e-12 * spec.dt_us) {
        throw ParameterError("noise trajectory step differs from sequence.dt_us");
    }
    std::vector<Bloch> path;
    evolve_into(spec, noise.samples, steps, path);
    std::vector<QubitState> out;
    out.reserve(path.size());
    for (const auto& a : path) out.push_back(QubitState::from_bloch(a));
    return out;
}

std::uint64_t trajectory_seed(const SequenceSpec& spec, std::size_t index) {
    return derive_seed(spec.master_seed, kTrajectoryStream, index);
}

EnsembleRecord simulate_ensemble(const SequenceSpec& spec, double duration_us, unsigned workers) {
    spec.validate();
    const std::size_t steps = step_count(spec, duration_us);
    const std::size_t points = steps + 1;
    const OUParams ou = spec.ou_params();
    const std::size_t n_blocks = (spec.n_traj + kBlockSize - 1) / kBlockSize;
    workers = std::max(1u, workers);

    BlockAccumulator total(points);
    for (std::size_t wave_start = 0; wave_start < n_blocks; wave_start += kWaveBlocks) {
        const std::size_t wave_end = std::min(n_blocks, wave_start + kWaveBlocks);
        std::vector<BlockAccumulator> blocks(wave_end - wave_start, BlockAccumulator(points));
        std::atomic<std::size_t> next{wave_start};

        auto work = [&] {
            std::vector<double> delta;
            std::vector<Bloch> path;
            for (std::size_t b = next++; b < wave_end; b = next++) {
                auto& acc = blocks[b - wave_start];
                const std::size_t first = b * kBlockSize;
                const std::size_t last = std::min(spec.n_traj, first + kBlockSize);
                for (std::size_t t = first; t < last; ++t) {
                    auto rng = make_rng(trajectory_seed(spec, t));
                    fill_ou_samples(ou, std::max<std::size_t>(steps, 1), rng, delta);
                    evolve_into(spec, delta, steps, path);
                    acc.add(path);
                }
            }
        };

        const unsigned n_threads =
            static_cast<unsigned>(std::min<std::size_t>(workers, wave_end - wave_start));
        if (n_threads <= 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(work);
        }
        for (const auto& acc : blocks) total.merge(acc);
    }

    EnsembleRecord rec;
    rec.n_traj = total.count;
    rec.times_us.resize(points);
    rec.mean.resize(points);
    rec.sem_x.resize(points);
    const double n = static_cast<double>(total.count);
    for (std::size_t i = 0; i < points; ++i) {
        rec.times_us[i] = static_cast<double>(i) * spec.dt_us;
        rec.mean[i] = Bloch(total.mean_x[i], total.sum_y[i] / n, total.sum_z[i] / n);
        rec.sem_x[i] = total.count > 1 ? std::sqrt(std::max(0.0, total.m2_x[i]) / (n - 1.0) / n) : 0.0;
    }
    return rec;
}

SignalSeries EnsembleRecord::signal() const {
    SignalSeries s;
    s.times_us = times_us;
    s.mean_sx.reserve(mean.size());
    for (const auto& a : mean) s.mean_sx.push_back(a.x());
    s.sem = sem_x;
    return s;
}

TomographySeries EnsembleRecord::tomography() const {
    TomographySeries t;
    t.times_us = times_us;
    for (const auto& a : mean) {
        t.sx.push_back(a.x());
        t.sy.push_back(a.y());
        t.sz.push_back(a.z());
        t.purity_loss.push_back(0.5 * (1.0 - a.squaredNorm()));
    }
    return t;
}

SignalSeries run_ensemble(const SequenceSpec& spec, double duration_us, unsigned workers) {
    return simulate_ensemble(spec, duration_us, workers).signal();
}

TomographySeries tomography(const SequenceSpec& spec, double duration_us, unsigned workers) {
    return simulate_ensemble(spec, duration_us, workers).tomography();
}

SignalSeries add_measurement_noise(const SignalSeries& series, const SequenceSpec& spec) {
    if (series.with_measurement_noise) {
        throw ParameterError("measurement noise has already been applied to this series");
    }
    if (!(spec.sigma_meas >= 0.0) || spec.n_shots < 1) {
        throw ParameterError("measurement noise needs sigma_meas >= 0 and n_shots >= 1");
    }
    SignalSeries out = series;
    out.with_measurement_noise = true;
    const double scale = spec.sigma_meas / std::sqrt(static_cast<double>(spec.n_shots));
    if (scale == 0.0) return out;
    auto rng = make_rng(derive_seed(spec.master_seed, kMeasurementStream, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.mean_sx[i] += scale * normal(rng);
        out.sem[i] = std::hypot(out.sem[i], scale);
    }
    return out;
}

FidelitySeries fidelities_at(const SignalSeries& series, const SequenceSpec& spec, double tau1_us,
                             int order) {
    const std::size_t step = grid_index(spec, tau1_us);
    const std::size_t last = step * static_cast<std::size_t>(order);
    if (last >= series.size()) {
        throw ParameterError(fmt::format("series covers {} points; order {} at tau1={} needs index {}",
                                         series.size(), order, tau1_us, last));
    }
    FidelitySeries fs;
    fs.tau1_us = tau1_us;
    fs.order = order;
    for (int k = 0; k <= order; ++k) {
        const std::size_t i = step * static_cast<std::size_t>(k);
        fs.r_values.push_back(series.mean_sx[i]);
        fs.r_sem.push_back(series.sem[i]);
    }
    for (int n = 1; n <= order; ++n) {
        const auto w = sigma_weights(n);
        const auto nn = static_cast<std::size_t>(n) + 1;
        fs.sigmas.push_back(combine_sigma(w, std::span(fs.r_values).first(nn),
                                          std::span(fs.r_sem).first(nn)));
    }
    return fs;
}

FidelitySeries measure_rk(const SequenceSpec& spec, unsigned workers) {
    spec.validate();
    auto series = run_ensemble(spec, spec.tau1_us * spec.max_order, workers);
    if (spec.sigma_meas > 0.0) series = add_measurement_noise(series, spec);
    return fidelities_at(series, spec, spec.tau1_us, spec.max_order);
}

void write_signal_csv(std::ostream& os, const SignalSeries& s) {
    os << "time_us,mean_sx,sem\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        fmt::print(os, "{},{},{}\n", s.times_us[i], s.mean_sx[i], s.sem[i]);
    }
}

void write_fidelities_csv(std::ostream& os, const std::vector<FidelitySeries>& rows) {
    os << "tau1_us,k,R_k,sigma2,sigma3,u_sigma2,u_sigma3\n";
    const double nan = std::nan("");
    for (const auto& fs : rows) {
        const bool has2 = fs.order >= 2, has3 = fs.order >= 3;
        const double s2 = has2 ? fs.sigma(2).value : nan, u2 = has2 ? fs.sigma(2).uncertainty : nan;
        const double s3 = has3 ? fs.sigma(3).value : nan, u3 = has3 ? fs.sigma(3).uncertainty : nan;
        for (std::size_t k = 0; k < fs.r_values.size(); ++k) {
            fmt::print(os, "{},{},{},{},{},{},{}\n", fs.tau1_us, k, fs.r_values[k], s2, s3, u2, u3);
        }
    }
}

void write_tomography_csv(std::ostream& os, const TomographySeries& t) {
    os << "time_us,sx,sy,sz,purity_loss\n";
    for (std::size_t i = 0; i < t.times_us.size(); ++i) {
        fmt::print(os, "{},{},{},{},{}\n", t.times_us[i], t.sx[i], t.sy[i], t.sz[i], t.purity_loss[i]);
    }
}

}  // namespace sigman
