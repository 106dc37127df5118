#include "sigman/error.hpp"
#include "sigman/estimation.hpp"
#include "sigman/liouville_lab.hpp"
#include "sigman/noise_process.hpp"
#include "sigman/trajectory_sim.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace sigman;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double rms_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

SequenceSpec quiet() {
    SequenceSpec s;
    s.n_traj = 1;
    s.dt_us = 1e-3;
    return s;
}

}  // namespace

TEST_SUITE("trajectory_sim") {

TEST_CASE("spec validation names fields") {
    SequenceSpec s = quiet();
    s.noise.b_mhz = 1.0;
    s.noise.tau_c_us = 0.005;
    try {
        s.validate();
        FAIL("expected a parameter error");
    } catch (const ParameterError& e) {
        const std::string m = e.what();
        CHECK(m.find("sequence.dt_us") != std::string::npos);
        CHECK(m.find("noise.tau_c_us") != std::string::npos);
    }
    s = quiet();
    s.drive_mhz = 100.0;
    CHECK_THROWS_AS(s.validate(), ParameterError);
    s = quiet();
    s.n_traj = 0;
    CHECK_THROWS_AS(s.validate(), ParameterError);
    s = quiet();
    s.tau1_us = 0.0;
    CHECK_THROWS_AS(s.validate(), ParameterError);
}

TEST_CASE("grid helpers") {
    const SequenceSpec s = quiet();
    CHECK(step_count(s, 1.0) == 1000);
    CHECK(step_count(s, 0.0) == 0);
    CHECK(grid_index(s, 0.25) == 250);
    CHECK_THROWS_AS(grid_index(s, 0.2505), ParameterError);
}

TEST_CASE("free evolution of an eigenstate") {
    const auto series = run_ensemble(quiet(), 2.0);
    REQUIRE(series.size() == 2001);
    for (double v : series.mean_sx) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("pure drive rotates about y") {
    SequenceSpec s = quiet();
    s.drive_mhz = 1.3;
    const auto series = run_ensemble(s, 3.0);
    std::vector<double> ref;
    for (double t : series.times_us) ref.push_back(std::cos(kTwoPi * s.drive_mhz * t));
    CHECK(rms_diff(series.mean_sx, ref) < 1e-6);
}

TEST_CASE("single trajectory equals the ensemble of one") {
    SequenceSpec s = quiet();
    s.drive_mhz = 0.5;
    s.noise.b_mhz = 0.3;
    s.noise.tau_c_us = 0.5;
    s.noise.gamma_pump_mhz = 0.05;
    const double duration = 1.0;
    const auto noise = ou_trajectory(s.ou_params(), step_count(s, duration), trajectory_seed(s, 0));
    const auto states = run_trajectory(s, noise, duration);
    const auto rec = simulate_ensemble(s, duration);
    REQUIRE(states.size() == rec.mean.size());
    for (std::size_t i = 0; i < states.size(); ++i) CHECK((states[i].bloch() - rec.mean[i]).norm() == 0.0);

    const auto short_noise = ou_trajectory(s.ou_params(), 10, 1);
    CHECK_THROWS_AS(run_trajectory(s, short_noise, duration), ParameterError);
}

TEST_CASE("ensemble is independent of worker count") {
    SequenceSpec s;
    s.drive_mhz = 0.7;
    s.noise.b_mhz = 0.4;
    s.noise.tau_c_us = 0.3;
    s.noise.gamma_phi_mhz = 0.05;
    s.dt_us = 0.005;
    s.n_traj = 1100;  // spans several waves with a ragged last block
    const auto a = simulate_ensemble(s, 1.0, 1);
    for (unsigned w : {2u, 3u, 8u}) {
        const auto b = simulate_ensemble(s, 1.0, w);
        CAPTURE(w);
        CHECK(a.sem_x == b.sem_x);
        bool same = true;
        for (std::size_t i = 0; i < a.mean.size(); ++i) same = same && a.mean[i] == b.mean[i];
        CHECK(same);
    }
    s.master_seed = 43;
    const auto c = simulate_ensemble(s, 1.0, 1);
    CHECK(c.mean.back() != a.mean.back());
}

TEST_CASE("signal stays bounded by its SEM") {
    SequenceSpec s;
    s.drive_mhz = 0.3;
    s.noise.b_mhz = 0.5;
    s.noise.tau_c_us = 1.0;
    s.dt_us = 0.01;
    s.n_traj = 300;
    const auto series = run_ensemble(s, 3.0);
    for (std::size_t i = 0; i < series.size(); ++i) CHECK(std::abs(series.mean_sx[i]) <= 1.0 + 5.0 * series.sem[i]);
}

TEST_CASE("SEM scales as one over root n") {
    SequenceSpec s;
    s.noise.b_mhz = 0.5;
    s.noise.tau_c_us = 2.0;
    s.dt_us = 0.01;
    s.n_traj = 500;
    const auto small = run_ensemble(s, 1.0);
    s.n_traj = 2000;
    const auto large = run_ensemble(s, 1.0);
    double ratio = 0.0;
    int n = 0;
    for (std::size_t i = 20; i < small.size(); i += 10) {
        ratio += small.sem[i] / large.sem[i];
        ++n;
    }
    CHECK(ratio / n == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("frozen detuning reproduces the static average") {
    SequenceSpec s;
    s.noise.b_mhz = 0.3;
    s.noise.tau_c_us = 1e12;
    s.dt_us = 0.005;
    s.n_traj = 200;
    const auto series = run_ensemble(s, 2.0);
    std::vector<double> delta0;
    for (std::size_t i = 0; i < s.n_traj; ++i) {
        delta0.push_back(ou_trajectory(s.ou_params(), 1, trajectory_seed(s, i)).samples[0]);
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < series.size(); j += 10) {
        double m = 0.0;
        for (double d : delta0) m += std::cos(kTwoPi * d * series.times_us[j]);
        worst = std::max(worst, std::abs(m / static_cast<double>(delta0.size()) - series.mean_sx[j]));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("quasi-static ensemble follows the Gaussian decay") {
    // Median over fixed seeds: one 2000-trajectory draw has a few percent
    // spread in its sample variance.
    const double t2 = 1.0;
    std::vector<double> rms;
    for (std::uint64_t seed = 42; seed < 47; ++seed) {
        SequenceSpec s;
        s.noise.b_mhz = calibrate_b_for_t2(t2);
        s.noise.tau_c_us = 1e3 * t2;
        s.dt_us = 0.005;
        s.n_traj = 2000;
        s.master_seed = seed;
        const auto series = run_ensemble(s, 2.0 * t2);
        std::vector<double> ref;
        for (double t : series.times_us) ref.push_back(std::exp(-(t / t2) * (t / t2)));
        rms.push_back(rms_diff(series.mean_sx, ref));
    }
    std::sort(rms.begin(), rms.end());
    CHECK(rms[2] < 0.02);
}

TEST_CASE("pure dephasing R_k and sigma_2") {
    SequenceSpec s = quiet();
    s.noise.gamma_phi_mhz = 0.2;
    s.tau1_us = 0.05;
    s.max_order = 3;
    const auto fs = measure_rk(s);
    REQUIRE(fs.r_values.size() == 4);
    CHECK(fs.r_values[0] == 1.0);
    for (int k = 0; k <= 3; ++k) {
        CHECK(fs.r_values[static_cast<std::size_t>(k)] ==
              doctest::Approx(std::exp(-kTwoPi * 0.2 * k * 0.05)).epsilon(1e-12));
    }
    CHECK(fs.sigma(2).value == doctest::Approx(-kTwoPi * 0.2 * 0.05).epsilon(0.01));
    for (int n = 1; n <= 3; ++n) {
        const auto direct = combine_sigma(sigma_weights(n), std::span(fs.r_values).first(static_cast<std::size_t>(n) + 1));
        CHECK(std::abs(fs.sigma(n).value - direct.value) < 1e-12);
    }
}

TEST_CASE("full revolution coherent error is invisible") {
    SequenceSpec s = quiet();
    s.drive_mhz = 2.0;
    s.tau1_us = 0.5;
    s.dt_us = 0.001;
    const auto fs = measure_rk(s);
    for (double r : fs.r_values) CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
    for (const auto& sg : fs.sigmas) CHECK(std::abs(sg.value) < 1e-9);
}

TEST_CASE("deterministic channel matches the exact propagator") {
    SequenceSpec s = quiet();
    s.drive_mhz = 0.8;
    s.noise.gamma_pump_mhz = 0.3;
    s.noise.gamma_phi_mhz = 0.15;
    s.tau1_us = 0.25;
    const auto fs = measure_rk(s);
    const auto spec = sequence_channel(s.drive_mhz, 0.3, 0.15, s.tau1_us);
    for (int k = 0; k <= 3; ++k) {
        CHECK(std::abs(fs.r_values[static_cast<std::size_t>(k)] - exact_rk(spec, k, Convention::Projection)) < 1e-5);
    }
}

TEST_CASE("halving dt barely moves the signal") {
    for (int cfg = 0; cfg < 2; ++cfg) {
        SequenceSpec s;
        s.drive_mhz = 1.0;
        s.noise.gamma_pump_mhz = 0.2;
        s.noise.gamma_phi_mhz = 0.1;
        s.dt_us = 0.004;
        s.n_traj = cfg == 0 ? 1 : 64;
        if (cfg == 1) {
            s.noise.b_mhz = 0.3;
            s.noise.tau_c_us = 1e4;
        }
        const auto coarse = run_ensemble(s, 2.0);
        s.dt_us = 0.002;
        const auto fine = run_ensemble(s, 2.0);
        std::vector<double> sub;
        for (std::size_t i = 0; i < fine.size(); i += 2) sub.push_back(fine.mean_sx[i]);
        CAPTURE(cfg);
        CHECK(rms_diff(coarse.mean_sx, sub) < 1e-4);
    }
}

TEST_CASE("measurement noise") {
    SequenceSpec s = quiet();
    const auto clean = run_ensemble(s, 10.0);
    REQUIRE(clean.size() == 10001);
    CHECK(add_measurement_noise(clean, s).mean_sx == clean.mean_sx);

    s.sigma_meas = 0.05;
    const auto noisy = add_measurement_noise(clean, s);
    CHECK(noisy.with_measurement_noise);
    CHECK_THROWS_AS(add_measurement_noise(noisy, s), ParameterError);
    double ss = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) ss += std::pow(noisy.mean_sx[i] - clean.mean_sx[i], 2);
    CHECK(std::sqrt(ss / static_cast<double>(clean.size())) == doctest::Approx(0.05).epsilon(0.05));
    CHECK(add_measurement_noise(clean, s).mean_sx == noisy.mean_sx);

    s.n_shots = 1000000;
    const auto many = add_measurement_noise(clean, s);
    CHECK(rms_diff(many.mean_sx, clean.mean_sx) < 1e-3);
}

TEST_CASE("tomography") {
    const auto still = tomography(quiet(), 1.0);
    for (std::size_t i = 0; i < still.times_us.size(); ++i) {
        CHECK(still.sx[i] == doctest::Approx(1.0));
        CHECK(still.purity_loss[i] == doctest::Approx(0.0).scale(1.0));
    }

    SequenceSpec s = quiet();
    s.noise.gamma_phi_mhz = 0.3;
    const auto t = tomography(s, 1.0);
    for (std::size_t i = 0; i < t.times_us.size(); i += 100) {
        const double expect = 0.5 * (1.0 - std::exp(-2.0 * kTwoPi * 0.3 * t.times_us[i]));
        CHECK(t.purity_loss[i] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("fitted exponent rises from motional narrowing to quasi-static") {
    // Ramsey decay under OU noise: exp(-(2 pi b)^2 tau_c^2 (e^(-t/tau_c) - 1 + t/tau_c)).
    const double b = 0.3;
    const double w = kTwoPi * b;
    std::vector<double> r;
    for (double tc_scale : {0.01, 1.0, 1000.0}) {
        // solve for the 1/e time of the analytic decay to set the window
        const double tc_guess = tc_scale;
        double lo = 1e-4, hi = 1e4;
        for (int it = 0; it < 200; ++it) {
            const double mid = std::sqrt(lo * hi);
            const double chi = w * w * tc_guess * tc_guess * (std::exp(-mid / tc_guess) - 1.0 + mid / tc_guess);
            (chi > 1.0 ? hi : lo) = mid;
        }
        const double t_e = lo;
        SequenceSpec s;
        s.noise.b_mhz = b;
        s.noise.tau_c_us = tc_scale * t_e;
        s.dt_us = std::min(t_e / 200.0, s.noise.tau_c_us / 10.0);
        s.n_traj = 1000;
        const auto series = run_ensemble(s, 2.0 * t_e);
        std::vector<double> tt, yy;
        const std::size_t stride = std::max<std::size_t>(1, (series.size() - 1) / 60);
        for (std::size_t i = 0; i < series.size(); i += stride) {
            tt.push_back(series.times_us[i]);
            yy.push_back(series.mean_sx[i]);
        }
        const auto fit = fit_stretched_exp(tt, yy);
        REQUIRE(fit.converged);
        r.push_back(fit.r);
    }
    CHECK(r[0] < r[1]);
    CHECK(r[1] < r[2]);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(0.15));
    CHECK(r[2] == doctest::Approx(2.0).epsilon(0.075));
}

TEST_CASE("csv writers") {
    SequenceSpec s = quiet();
    s.tau1_us = 0.01;
    const auto series = run_ensemble(s, 0.03);
    std::ostringstream a, b, c;
    write_signal_csv(a, series);
    CHECK(a.str().rfind("time_us,mean_sx,sem\n", 0) == 0);
    write_fidelities_csv(b, {fidelities_at(series, s, 0.01, 3)});
    CHECK(b.str().rfind("tau1_us,k,R_k,sigma2,sigma3,u_sigma2,u_sigma3\n", 0) == 0);
    write_tomography_csv(c, tomography(s, 0.03));
    CHECK(c.str().rfind("time_us,sx,sy,sz,purity_loss\n", 0) == 0);
    CHECK_THROWS_AS(fidelities_at(series, s, 0.02, 3), ParameterError);
}

}
