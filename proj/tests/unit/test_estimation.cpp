#include "sigman/error.hpp"
#include "sigman/estimation.hpp"
#include "sigman/protocol_weights.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

using namespace sigman;

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
    return v;
}

std::vector<double> sample(const DecayModel& m, const std::vector<double>& t, double T, double r) {
    std::vector<double> y;
    for (double x : t) y.push_back(m.value(x, T, r));
    return y;
}

bool psd(const Eigen::Matrix2d& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c);
    return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, c.norm());
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("model coefficients") {
    CHECK(DecayModel::stretched_exp().coeffs == std::vector<double>{0.0, 1.0});
    const auto s2 = DecayModel::sigma(2, SigmaModel::WeightConsistent);
    CHECK(s2.coeffs == std::vector<double>{1.5, -2.0, 0.5});
    CHECK(DecayModel::sigma(2, SigmaModel::LiteralCoefficients).coeffs == s2.coeffs);
    const auto s3 = DecayModel::sigma(3, SigmaModel::WeightConsistent);
    REQUIRE(s3.coeffs.size() == 4);
    CHECK(s3.coeffs[0] == doctest::Approx(11.0 / 6.0));
    CHECK(s3.coeffs[1] == doctest::Approx(-3.0));
    CHECK(s3.coeffs[2] == doctest::Approx(1.5));
    CHECK(s3.coeffs[3] == doctest::Approx(-1.0 / 3.0));
    const auto lit = DecayModel::sigma(3, SigmaModel::LiteralCoefficients);
    CHECK(lit.coeffs[0] == doctest::Approx(5.0 / 3.0));
    CHECK(lit.coeffs[3] == doctest::Approx(-1.0 / 6.0));
    for (const auto& m : {s2, s3, lit}) CHECK(std::abs(m.value(0.0, 1.0, 1.3)) < 1e-15);
    CHECK_THROWS_AS(DecayModel::sigma(4, SigmaModel::WeightConsistent), ParameterError);
    CHECK(parse_sigma_model("literal") == SigmaModel::LiteralCoefficients);
    CHECK(to_string(parse_sigma_model("weight-consistent")) == "weight-consistent");
    CHECK_THROWS_AS(parse_sigma_model("eq10"), ParameterError);
}

TEST_CASE("short-time sigma_2 model is linear") {
    const auto m = DecayModel::sigma(2, SigmaModel::WeightConsistent);
    for (double t : {1e-3, 1e-2}) CHECK(m.value(t, 1.0, 1.0) == doctest::Approx(t).epsilon(2 * t));
}

TEST_CASE("stretched exponential recovery") {
    const auto m = DecayModel::stretched_exp();
    const auto t = linspace(0.0, 44.2, 60);
    const auto f = fit_stretched_exp(t, sample(m, t, 22.1, 2.47));
    REQUIRE(f.converged);
    CHECK(f.T_us == doctest::Approx(22.1).epsilon(1e-3));
    CHECK(f.r == doctest::Approx(2.47).epsilon(1e-3));
    CHECK(psd(f.covariance));

    const auto t2 = linspace(0.0, 2.43, 60);
    const auto g = fit_stretched_exp(t2, sample(m, t2, 0.81, 1.0));
    REQUIRE(g.converged);
    CHECK(g.T_us == doctest::Approx(0.81).epsilon(1e-3));
    CHECK(g.r == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("constant data is flagged") {
    const auto t = linspace(0.0, 5.0, 30);
    const std::vector<double> y(t.size(), 1.0);
    const auto f = fit_stretched_exp(t, y);
    CHECK_FALSE(f.converged);
    CHECK_FALSE(f.diagnostic.empty());
}

TEST_CASE("input checks") {
    const auto t = linspace(0.0, 1.0, 5);
    CHECK_THROWS_AS(fit_stretched_exp(t, std::vector<double>(5, 0.5)), ParameterError);
    const auto t8 = linspace(0.0, 1.0, 8);
    std::vector<double> y(8, 0.5);
    y[3] = 1.5;
    CHECK_THROWS_AS(fit_stretched_exp(t8, y), ParameterError);
    CHECK_THROWS_AS(fit_stretched_exp(t8, std::vector<double>(7, 0.5)), ParameterError);
    CHECK_THROWS_AS(fit_stretched_exp(t8, std::vector<double>(8, 0.5), std::vector<double>(8, 0.0)), ParameterError);
}

TEST_CASE("generate-and-fit closure for all models") {
    const std::vector<std::pair<DecayModel, std::string>> models{
        {DecayModel::stretched_exp(), "ramsey"},
        {DecayModel::sigma(2, SigmaModel::WeightConsistent), "sigma2"},
        {DecayModel::sigma(3, SigmaModel::WeightConsistent), "sigma3"},
        {DecayModel::sigma(3, SigmaModel::LiteralCoefficients), "literal"},
    };
    for (const auto& [m, name] : models) {
        for (auto [T, r] : {std::pair{1.0, 1.0}, std::pair{0.81, 1.23}, std::pair{22.1, 2.0}, std::pair{3.0, 1.6}}) {
            const auto t = linspace(T / 30.0, 2.0 * T, 60);
            const auto f = fit_model(m, t, sample(m, t, T, r));
            CAPTURE(name);
            CAPTURE(T);
            CAPTURE(r);
            REQUIRE(f.converged);
            CHECK(f.T_us == doctest::Approx(T).epsilon(5e-3));
            CHECK(f.r == doctest::Approx(r).epsilon(5e-3));
        }
    }
}

TEST_CASE("sigma_2 data built from R_k recovers (T, r)") {
    const auto t = linspace(0.02, 2.0, 60);
    std::vector<double> neg;
    const auto w = sigma_weights(2).as_double();
    for (double x : t) {
        double s = 0.0;
        for (int k = 0; k <= 2; ++k) s += w[static_cast<std::size_t>(k)] * std::exp(-k * x);
        neg.push_back(-s);
    }
    const auto f = fit_sigma_model(t, neg, 2);
    REQUIRE(f.converged);
    CHECK(f.T_us == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(f.r == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("noisy closure within two standard errors") {
    // Over repeated noisy fits the mean lands within 2 SEM of the truth.
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.02);
    const std::vector<DecayModel> models{DecayModel::stretched_exp(), DecayModel::sigma(2, SigmaModel::WeightConsistent),
                                         DecayModel::sigma(3, SigmaModel::WeightConsistent)};
    const double T = 1.0, r = 1.3;
    for (const auto& m : models) {
        const auto t = linspace(0.04, 2.0, 50);
        const auto clean = sample(m, t, T, r);
        std::vector<double> Ts, rs;
        for (int rep = 0; rep < 40; ++rep) {
            auto y = clean;
            for (double& v : y) v += noise(rng);
            const auto f = fit_model(m, t, y, std::vector<double>(y.size(), 0.02));
            if (f.converged) {
                Ts.push_back(f.T_us);
                rs.push_back(f.r);
            }
        }
        REQUIRE(Ts.size() >= 36);
        auto check = [](const std::vector<double>& v, double truth) {
            double mean = 0.0, ss = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            for (double x : v) ss += (x - mean) * (x - mean);
            const double sem = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) / static_cast<double>(v.size()));
            CHECK(std::abs(mean - truth) < 2.0 * sem + 1e-3 * truth);
        };
        check(Ts, T);
        check(rs, r);
    }
}

TEST_CASE("weighted covariance tracks the scatter") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.01);
    const auto m = DecayModel::stretched_exp();
    const auto t = linspace(0.0, 2.0, 60);
    const auto clean = sample(m, t, 1.0, 1.5);
    std::vector<double> Ts;
    double reported = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        auto y = clean;
        for (double& v : y) v += noise(rng);
        const auto f = fit_model(m, t, y, std::vector<double>(y.size(), 0.01));
        REQUIRE(f.converged);
        CHECK(psd(f.covariance));
        Ts.push_back(f.T_us);
        reported += f.T_err();
    }
    double mean = 0.0, ss = 0.0;
    for (double x : Ts) mean += x;
    mean /= 200.0;
    for (double x : Ts) ss += (x - mean) * (x - mean);
    CHECK(std::sqrt(ss / 199.0) == doctest::Approx(reported / 200.0).epsilon(0.2));
}

TEST_CASE("fit is invariant under time rescaling") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.01);
    const auto m = DecayModel::stretched_exp();
    const auto t = linspace(0.0, 2.0, 40);
    auto y = sample(m, t, 0.9, 1.4);
    for (double& v : y) v += noise(rng);
    const auto base = fit_stretched_exp(t, y);
    REQUIRE(base.converged);
    for (double c : {1e-3, 0.5, 7.0, 1e4}) {
        std::vector<double> ts;
        for (double x : t) ts.push_back(c * x);
        const auto f = fit_stretched_exp(ts, y);
        CAPTURE(c);
        REQUIRE(f.converged);
        CHECK(std::abs(f.T_us / c - base.T_us) < 1e-9 * base.T_us);
        CHECK(std::abs(f.r - base.r) < 1e-9);
    }
}

TEST_CASE("accumulated error") {
    SampledCurve a{{0.0, 0.1, 0.2, 0.3}, {1.0, 0.8, 0.5, 0.2}};
    const auto zero = accumulated_error(a, a);
    for (double v : zero) CHECK(v == 0.0);

    SampledCurve b{a.t, {1.0, 0.9, 0.3, 0.2}};
    const auto acc = accumulated_error(a, b);
    CHECK(acc == std::vector<double>{0.0, std::abs(0.8 - 0.9), std::abs(0.8 - 0.9) + std::abs(0.5 - 0.3),
                                     std::abs(0.8 - 0.9) + std::abs(0.5 - 0.3)});

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int i = 0; i < 100; ++i) {
        SampledCurve c{a.t, {n(rng), n(rng), n(rng), n(rng)}};
        SampledCurve d{a.t, {n(rng), n(rng), n(rng), n(rng)}};
        const auto e = accumulated_error(c, d);
        for (std::size_t j = 1; j < e.size(); ++j) CHECK(e[j] >= e[j - 1]);
        CHECK(e.back() > 0.0);
    }

    SampledCurve shifted{{0.0, 0.1, 0.2, 0.31}, a.y};
    CHECK_THROWS_AS(accumulated_error(a, shifted), ParameterError);
    SampledCurve shorter{{0.0, 0.1}, {1.0, 1.0}};
    CHECK_THROWS_AS(accumulated_error(a, shorter), ParameterError);
}

TEST_CASE("method curves read R at multiples of tau1") {
    SignalSeries s;
    for (int i = 0; i <= 30; ++i) {
        s.times_us.push_back(0.1 * i);
        s.mean_sx.push_back(std::exp(-0.1 * i));
        s.sem.push_back(0.0);
    }
    const auto c = method_curves(s, 2, 5);
    REQUIRE(c.ramsey.t.size() == 6);
    CHECK(c.ramsey.t[3] == doctest::Approx(0.6));
    CHECK(c.ramsey.y[3] == doctest::Approx(std::exp(-0.6)));
    const double x = 0.6;
    CHECK(c.sigma2.y[3] == doctest::Approx(-(-1.5 + 2 * std::exp(-x) - 0.5 * std::exp(-2 * x))));
    CHECK(c.sigma3.y[0] == doctest::Approx(0.0).scale(1.0));
    CHECK_THROWS_AS(method_curves(s, 2, 5 + 1), ParameterError);
    CHECK_THROWS_AS(method_curves(s, 0, 5), ParameterError);
}

TEST_CASE("purity loss matches -sigma_n in the weak regime") {
    SequenceSpec s;
    s.n_traj = 1;
    s.dt_us = 5e-4;
    s.noise.gamma_phi_mhz = 0.2;
    const auto rows = purity_comparison(s, 0.0, 0.1, 20, 0.05, 1);
    REQUIRE(!rows.empty());
    CHECK(rows.front().dP == doctest::Approx(0.0).scale(1.0));
    CHECK(rows.front().neg_sigma2 == doctest::Approx(0.0).scale(1.0));
    CHECK(rows.front().neg_sigma3 == doctest::Approx(0.0).scale(1.0));
    const double g = 2.0 * M_PI * 0.2;
    for (const auto& r : rows) {
        CHECK(r.dP <= 0.05);
        CHECK(r.dP == doctest::Approx(0.5 * (1 - std::exp(-2 * g * r.t_us))).epsilon(1e-9));
        CHECK(r.neg_sigma2 == doctest::Approx(1.5 - 2 * std::exp(-g * r.t_us) + 0.5 * std::exp(-2 * g * r.t_us)).epsilon(1e-9));
        CHECK(std::abs(r.dP - r.neg_sigma2) <= 2.0 * std::pow(g * r.t_us, 2));
    }

    // truncation stops before the loss exceeds the threshold
    const auto capped = purity_comparison(s, 0.0, 0.5, 50, 0.05, 1);
    CHECK(capped.size() < 51);
    for (const auto& r : capped) CHECK(r.dP <= 0.05);
}

TEST_CASE("sweep bookkeeping") {
    SequenceSpec s;
    s.n_traj = 1;
    s.dt_us = 0.01;
    s.sigma_meas = 0.02;
    s.noise.gamma_phi_mhz = 1.0 / (2.0 * M_PI * 0.81);
    SweepOptions opt;
    opt.t2_ref_us = 0.81;
    opt.window_us = 1.62;
    opt.fit_points = 54;
    const std::vector<double> drives{0.0, 0.1};
    CHECK_THROWS_AS(t2_sweep(s, drives, 4, opt), ParameterError);
    const auto res = t2_sweep(s, drives, 6, opt);
    REQUIRE(res.points.size() == 2);
    CHECK_FALSE(res.failed);
    for (const auto& p : res.points) {
        for (int k = 0; k < 3; ++k) {
            CHECK(p.method(k).n_converged + p.method(k).n_excluded == 6);
            CHECK(std::isfinite(p.method(k).T_sem));
        }
    }
    const auto again = t2_sweep(s, drives, 6, opt);
    CHECK(again.points[1].sigma3.T_mean == res.points[1].sigma3.T_mean);

    std::ostringstream os;
    write_fits_csv(os, res);
    CHECK(os.str().rfind("method,drive_mhz,T_us,r,T_sem,r_sem,n_converged\n", 0) == 0);

    opt.window_us = 1.625;
    CHECK_THROWS_AS(t2_sweep(s, drives, 6, opt), ParameterError);
}

TEST_CASE("accumulated error scan is zero without drive") {
    SequenceSpec s;
    s.n_traj = 1;
    s.dt_us = 0.0081;
    s.noise.gamma_phi_mhz = 0.2;
    const auto t = accumulated_error_scan(s, 0.81, 50, 1.0, 1);
    REQUIRE(t.t_norm.size() == 51);
    CHECK(t.t_norm.back() == doctest::Approx(1.0));
    CHECK(t.ramsey.back() == 0.0);
    CHECK(t.sigma3.back() == 0.0);
    std::ostringstream os;
    write_accerr_csv(os, t);
    CHECK(os.str().rfind("t_norm,A_ramsey,A_sigma2,A_sigma3\n", 0) == 0);
}

}
