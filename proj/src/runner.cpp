#include "sigman/runner.hpp"

#include "sigman/csv.hpp"
#include "sigman/error.hpp"
#include "sigman/estimation.hpp"
#include "sigman/liouville_lab.hpp"
#include "sigman/protocol_weights.hpp"
#include "sigman/trajectory_sim.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <chrono>
#include <filesystem>
#include <ostream>

namespace sigman {

namespace fs = std::filesystem;
using nlohmann::json;

json version_info() {
    return {{"sigman", SIGMAN_VERSION},
            {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"fmt", FMT_VERSION},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                          NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}};
}

namespace {

struct Context {
    const RunConfig& cfg;
    fs::path dir;
    std::ostream& out;
    RunReport& report;

    SequenceSpec spec() const {
        SequenceSpec s = cfg.sequence;
        s.master_seed = cfg.master_seed;
        return s;
    }

    void csv(const std::string& name, const std::function<void(std::ostream&)>& body) {
        write_text_file(dir / name, body);
        report.outputs.push_back(name);
    }

    void fit_failure(const std::string& what) {
        report.failures.push_back(what);
        if (report.exit_code == kExitOk) report.exit_code = kExitFitQuality;
    }
};

double signal_duration(const RunConfig& c, double fallback) {
    return c.analysis.duration_us > 0.0 ? c.analysis.duration_us : fallback;
}

void run_weights(Context& cx) {
    std::vector<WeightVector> all;
    for (int n : cx.cfg.analysis.weight_orders) {
        all.push_back(sigma_weights(n));
        std::string line;
        for (const auto& a : all.back().exact()) line += (line.empty() ? "" : ", ") + a.str();
        fmt::print(cx.out, "n={}: {}\n", n, line);
    }
    cx.csv("weights.csv", [&](std::ostream& os) {
        os << "n,k,a_exact,a_double\n";
        for (const auto& w : all) {
            const auto d = w.as_double();
            for (std::size_t k = 0; k < w.size(); ++k) {
                fmt::print(os, "{},{},{},{}\n", w.order(), k, w.exact()[k].str(), d[k]);
            }
        }
    });
}

std::vector<double> column(const std::vector<double>& v, std::size_t stride, std::size_t points) {
    std::vector<double> out;
    for (std::size_t j = 0; j <= points; ++j) out.push_back(v[j * stride]);
    return out;
}

void run_ramsey(Context& cx) {
    const auto& a = cx.cfg.analysis;
    const SequenceSpec spec = cx.spec();
    const std::size_t stride = grid_index(spec, a.fit_window_us / static_cast<double>(a.fit_points));
    if (stride == 0) throw ParameterError("analysis.fit_window_us/analysis.fit_points is below sequence.dt_us");
    auto series = run_ensemble(spec, signal_duration(cx.cfg, a.fit_window_us), cx.cfg.workers);
    if (spec.sigma_meas > 0.0) series = add_measurement_noise(series, spec);
    if (series.size() <= stride * a.fit_points) {
        throw ParameterError("analysis.duration_us is shorter than analysis.fit_window_us");
    }
    cx.csv("signal.csv", [&](std::ostream& os) { write_signal_csv(os, series); });

    const auto t = column(series.times_us, stride, a.fit_points);
    const auto y = column(series.mean_sx, stride, a.fit_points);
    const auto fit = spec.sigma_meas > 0.0
                         ? fit_stretched_exp(t, y, column(series.sem, stride, a.fit_points))
                         : fit_stretched_exp(t, y);
    cx.csv("fit.csv", [&](std::ostream& os) { write_fit_table(os, {{"ramsey", spec.drive_mhz, fit}}); });
    fmt::print(cx.out, "ramsey fit: T = {:.6g} +- {:.3g} us, r = {:.4f} +- {:.3g}{}\n", fit.T_us, fit.T_err(),
               fit.r, fit.r_err(), fit.converged ? "" : " (not converged: " + fit.diagnostic + ")");
    if (!fit.converged) cx.fit_failure("ramsey fit: " + fit.diagnostic);
}

void run_scan(Context& cx) {
    const auto& a = cx.cfg.analysis;
    const double duration = signal_duration(cx.cfg, 3.0 * a.t2_ref_us);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < a.drive_grid_mhz.size(); ++i) {
        SequenceSpec spec = cx.spec();
        spec.drive_mhz = a.drive_grid_mhz[i];
        auto series = run_ensemble(spec, duration, cx.cfg.workers);
        if (spec.sigma_meas > 0.0) series = add_measurement_noise(series, spec);
        files.push_back(fmt::format("signals_d{}.csv", i));
        cx.csv(files.back(), [&](std::ostream& os) { write_signal_csv(os, series); });
    }
    cx.csv("scan_index.csv", [&](std::ostream& os) {
        os << "index,drive_mhz,file\n";
        for (std::size_t i = 0; i < files.size(); ++i) fmt::print(os, "{},{},{}\n", i, a.drive_grid_mhz[i], files[i]);
    });
    fmt::print(cx.out, "scan: {} drives over {} us\n", files.size(), duration);
}

void run_sigma(Context& cx) {
    const auto& a = cx.cfg.analysis;
    const SequenceSpec spec = cx.spec();
    const std::size_t stride = grid_index(spec, a.fit_window_us / static_cast<double>(a.fit_points));
    if (stride == 0) throw ParameterError("analysis.fit_window_us/analysis.fit_points is below sequence.dt_us");
    auto series = run_ensemble(spec, 3.0 * a.fit_window_us, cx.cfg.workers);
    if (spec.sigma_meas > 0.0) series = add_measurement_noise(series, spec);
    const auto curves = method_curves(series, stride, a.fit_points);

    std::vector<FidelitySeries> fids;
    for (std::size_t j = 1; j <= a.fit_points; ++j) {
        fids.push_back(fidelities_at(series, spec, series.times_us[j * stride], 3));
    }
    cx.csv("signal.csv", [&](std::ostream& os) { write_signal_csv(os, series); });
    cx.csv("sigma_curves.csv", [&](std::ostream& os) { write_method_curves_csv(os, curves); });
    cx.csv("fidelities.csv", [&](std::ostream& os) { write_fidelities_csv(os, fids); });

    const std::vector<double> t(curves.ramsey.t.begin() + 1, curves.ramsey.t.end());
    auto tail = [](const SampledCurve& c) { return std::vector<double>(c.y.begin() + 1, c.y.end()); };
    std::vector<NamedFit> fits{
        {"ramsey", spec.drive_mhz, fit_stretched_exp(curves.ramsey.t, curves.ramsey.y)},
        {"sigma2", spec.drive_mhz, fit_sigma_model(t, tail(curves.sigma2), 2, a.sigma_model)},
        {"sigma3", spec.drive_mhz, fit_sigma_model(t, tail(curves.sigma3), 3, a.sigma_model)},
    };
    cx.csv("fit.csv", [&](std::ostream& os) { write_fit_table(os, fits); });
    for (const auto& f : fits) {
        fmt::print(cx.out, "{}: T = {:.6g} us, r = {:.4f}{}\n", f.method, f.fit.T_us, f.fit.r,
                   f.fit.converged ? "" : " (not converged: " + f.fit.diagnostic + ")");
        if (!f.fit.converged) cx.fit_failure(f.method + " fit: " + f.fit.diagnostic);
    }
}

void run_accerr(Context& cx) {
    const auto& a = cx.cfg.analysis;
    const auto table = accumulated_error_scan(cx.spec(), a.t2_ref_us, a.accerr_points, a.t_norm_max, cx.cfg.workers);
    cx.csv("accerr.csv", [&](std::ostream& os) { write_accerr_csv(os, table); });
    fmt::print(cx.out, "accumulated error at t/T2* = {}: ramsey {:.6g}, sigma2 {:.6g}, sigma3 {:.6g}\n",
               table.t_norm.back(), table.ramsey.back(), table.sigma2.back(), table.sigma3.back());
}

void run_sweep(Context& cx) {
    const auto& a = cx.cfg.analysis;
    SweepOptions opt;
    opt.t2_ref_us = a.t2_ref_us;
    opt.window_us = a.fit_window_us;
    opt.fit_points = a.fit_points;
    opt.model = a.sigma_model;
    opt.workers = cx.cfg.workers;
    const auto sweep = t2_sweep(cx.spec(), a.drive_grid_mhz, a.repeats, opt);
    cx.csv("fits.csv", [&](std::ostream& os) { write_fits_csv(os, sweep); });
    for (const auto& p : sweep.points) {
        fmt::print(cx.out, "drive {:g} MHz:", p.drive_mhz);
        for (int k = 0; k < 3; ++k) {
            const auto& st = p.method(k);
            fmt::print(cx.out, "  {} T = {:.4g} +- {:.2g}", st.method, st.T_mean, st.T_sem);
        }
        fmt::print(cx.out, "\n");
    }
    if (sweep.failed) cx.fit_failure(sweep.failure);
}

void run_purity(Context& cx) {
    const auto& a = cx.cfg.analysis;
    const SequenceSpec spec = cx.spec();
    const auto rows = purity_comparison(spec, spec.drive_mhz, a.purity_t_max_us, a.purity_points,
                                        a.purity_max_dp, cx.cfg.workers);
    SequenceSpec clean = spec;
    clean.sigma_meas = 0.0;
    const auto tomo = tomography(clean, a.purity_t_max_us, cx.cfg.workers);
    cx.csv("purity.csv", [&](std::ostream& os) { write_purity_csv(os, rows); });
    cx.csv("tomography.csv", [&](std::ostream& os) { write_tomography_csv(os, tomo); });
    double d2 = 0.0, d3 = 0.0;
    for (const auto& r : rows) {
        d2 = std::max(d2, std::abs(r.dP - r.neg_sigma2));
        d3 = std::max(d3, std::abs(r.dP - r.neg_sigma3));
    }
    fmt::print(cx.out, "purity: {} points with dP <= {}; max|dP + sigma2| = {:.3g}, max|dP + sigma3| = {:.3g}\n",
               rows.size(), a.purity_max_dp, d2, d3);
}

void run_convergence(Context& cx) {
    const auto& cv = cx.cfg.convergence;
    const auto channel = cv.channel();
    const auto grid = geometric_grid(cv.x_min, cv.x_max, static_cast<int>(cv.x_points));
    std::vector<ConvergenceResult> results;
    for (int n : cv.orders) results.push_back(convergence_order(channel, n, grid, cv.convention));
    cx.csv("convergence.csv", [&](std::ostream& os) { write_convergence_csv(os, results); });
    cx.csv("slopes.csv", [&](std::ostream& os) {
        os << "n,slope,expected,at_numerical_floor\n";
        for (const auto& r : results) {
            fmt::print(os, "{},{},{},{}\n", r.order, r.slope ? fmt::format("{}", *r.slope) : "nan", r.order + 1,
                       r.at_numerical_floor ? 1 : 0);
        }
    });
    for (const auto& r : results) {
        if (r.slope) {
            fmt::print(cx.out, "n={}: slope {:.4f} (expected {})\n", r.order, *r.slope, r.order + 1);
        } else {
            fmt::print(cx.out, "n={}: error at numerical floor\n", r.order);
        }
    }
}

}  // namespace

RunReport run_scenario(const RunConfig& config, std::ostream& out) {
    RunReport report;
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = config.output_dir;
    fs::create_directories(dir);
    write_text_file(dir / "config.json", [&](std::ostream& os) { os << to_json(config).dump(2) << '\n'; });
    report.outputs.push_back("config.json");

    Context cx{config, dir, out, report};
    try {
        config.validate();
        const auto& s = config.scenario;
        if (s == "weights") run_weights(cx);
        else if (s == "ramsey") run_ramsey(cx);
        else if (s == "scan") run_scan(cx);
        else if (s == "sigma") run_sigma(cx);
        else if (s == "accerr") run_accerr(cx);
        else if (s == "sweep") run_sweep(cx);
        else if (s == "purity") run_purity(cx);
        else if (s == "convergence") run_convergence(cx);
    } catch (const ParameterError& e) {
        report.failures.push_back(e.what());
        report.exit_code = kExitConfig;
    } catch (const FitQualityError& e) {
        report.failures.push_back(e.what());
        report.exit_code = kExitFitQuality;
    } catch (const std::exception& e) {
        report.failures.push_back(e.what());
        report.exit_code = kExitRuntime;
    }
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json manifest{{"scenario", config.scenario},
                  {"name", config.name},
                  {"master_seed", config.master_seed},
                  {"workers", config.workers},
                  {"config", to_json(config)},
                  {"outputs", report.outputs},
                  {"status", report.exit_code == kExitOk ? "ok" : "failed"},
                  {"exit_code", report.exit_code},
                  {"failures", report.failures},
                  {"wall_time_s", report.wall_time_s},
                  {"versions", version_info()}};
    write_text_file(dir / "manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    for (const auto& f : report.failures) fmt::print(out, "FAILURE: {}\n", f);
    return report;
}

}  // namespace sigman
