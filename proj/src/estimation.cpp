#include "sigman/estimation.hpp"

#include "sigman/error.hpp"
#include "sigman/protocol_weights.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

namespace sigman {

SigmaModel parse_sigma_model(const std::string& name) {
    if (name == "weight-consistent") return SigmaModel::WeightConsistent;
    if (name == "literal") return SigmaModel::LiteralCoefficients;
    throw ParameterError("unknown sigma model '" + name + "' (expected weight-consistent|literal)");
}

std::string to_string(SigmaModel m) {
    return m == SigmaModel::WeightConsistent ? "weight-consistent" : "literal";
}

DecayModel DecayModel::stretched_exp() { return {{0.0, 1.0}}; }

DecayModel DecayModel::sigma(int order, SigmaModel model) {
    if (order != 2 && order != 3) {
        throw ParameterError(fmt::format("sigma fit model supports order 2 or 3, got {}", order));
    }
    if (model == SigmaModel::LiteralCoefficients && order == 3) {
        return {{5.0 / 3.0, -5.0 / 2.0, 1.0, -1.0 / 6.0}};
    }
    DecayModel m;
    for (double a : sigma_weights(order).as_double()) m.coeffs.push_back(-a);
    return m;
}

double DecayModel::value(double t, double T, double r) const {
    double f = coeffs[0];
    for (std::size_t m = 1; m < coeffs.size(); ++m) {
        f += coeffs[m] * std::exp(-std::pow(static_cast<double>(m) * t / T, r));
    }
    return f;
}

namespace {

constexpr int kMaxIterations = 300;

struct Problem {
    const DecayModel& model;
    std::span<const double> t;
    std::span<const double> y;
    std::vector<double> sqrt_w;
};

// Residuals sqrt(w)(y - f) and their Jacobian with respect to (log T, r).
double evaluate(const Problem& pr, double log_T, double r, Eigen::VectorXd& res,
                Eigen::MatrixXd* jac) {
    const double T = std::exp(log_T);
    const std::size_t n = pr.t.size();
    res.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        double f = pr.model.coeffs[0], d_s = 0.0, d_r = 0.0;
        for (std::size_t m = 1; m < pr.model.coeffs.size(); ++m) {
            const double z = static_cast<double>(m) * pr.t[i] / T;
            if (z <= 0.0) {
                f += pr.model.coeffs[m];
                continue;
            }
            const double lz = std::log(z);
            const double u = std::exp(r * lz);
            const double e = std::exp(-u);
            const double ce = pr.model.coeffs[m] * e;
            f += ce;
            d_s += ce * u * r;
            d_r -= ce * u * lz;
        }
        const auto ii = static_cast<Eigen::Index>(i);
        res(ii) = pr.sqrt_w[i] * (pr.y[i] - f);
        if (jac) {
            (*jac)(ii, 0) = -pr.sqrt_w[i] * d_s;
            (*jac)(ii, 1) = -pr.sqrt_w[i] * d_r;
        }
    }
    return 0.5 * res.squaredNorm();
}

// Time at which the data first crosses the model value at t = T.
double crossing_time(const Problem& pr, double r0) {
    const double level = pr.model.value(1.0, 1.0, r0);
    const double s0 = pr.y[0] - level;
    for (std::size_t i = 1; i < pr.t.size(); ++i) {
        if ((pr.y[i] - level) * s0 <= 0.0 && pr.t[i] > 0.0) return pr.t[i];
    }
    return pr.t.back();
}

FitResult levenberg_marquardt(const Problem& pr, double T0, double r0) {
    FitResult out;
    double s = std::log(T0);
    double r = std::clamp(r0, kMinExponent, kMaxExponent);
    Eigen::VectorXd res, trial_res;
    Eigen::MatrixXd jac;
    double cost = evaluate(pr, s, r, res, &jac);
    double lambda = 1e-3;
    bool converged = false;

    int it = 0;
    for (; it < kMaxIterations && !converged; ++it) {
        const Eigen::Matrix2d a = jac.transpose() * jac;
        const Eigen::Vector2d g = jac.transpose() * res;
        if (cost <= 1e-30 || g.cwiseAbs().maxCoeff() <= 1e-14 * std::max(cost, 1e-300)) {
            converged = true;
            break;
        }
        bool accepted = false;
        while (!accepted) {
            Eigen::Matrix2d damped = a;
            damped(0, 0) += lambda * std::max(a(0, 0), 1e-12);
            damped(1, 1) += lambda * std::max(a(1, 1), 1e-12);
            const Eigen::Vector2d step = damped.ldlt().solve(-g);
            const double s_new = s + step(0);
            const double r_new = std::clamp(r + step(1), kMinExponent, kMaxExponent);
            const double c_new = evaluate(pr, s_new, r_new, trial_res, nullptr);
            if (std::isfinite(c_new) && c_new <= cost) {
                const double ds = std::abs(s_new - s), dr = std::abs(r_new - r);
                const double rel_drop = (cost - c_new) / std::max(cost, 1e-300);
                s = s_new;
                r = r_new;
                cost = evaluate(pr, s, r, res, &jac);
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if ((ds < 1e-12 && dr < 1e-12) || rel_drop < 1e-15) converged = true;
            } else {
                lambda *= 4.0;
                if (lambda > 1e14) break;
            }
        }
        if (!accepted) {
            // No downhill step at any damping: a stationary point up to rounding.
            converged = g.cwiseAbs().maxCoeff() <= 1e-6 * std::max(std::sqrt(2.0 * cost), 1e-12);
            if (!converged) out.diagnostic = "damping exhausted without descent";
            break;
        }
    }
    out.T_us = std::exp(s);
    out.r = r;
    out.n_iterations = it;
    out.converged = converged;
    if (!converged && out.diagnostic.empty()) out.diagnostic = "iteration limit reached";
    return out;
}

void finalize(const Problem& pr, FitResult& fit, bool weighted) {
    Eigen::VectorXd res;
    Eigen::MatrixXd jac;
    evaluate(pr, std::log(fit.T_us), fit.r, res, &jac);
    jac.col(0) /= fit.T_us;  // d/dlogT -> d/dT
    const auto n = static_cast<double>(pr.t.size());

    double rss = 0.0;
    for (std::size_t i = 0; i < pr.t.size(); ++i) {
        const double d = res(static_cast<Eigen::Index>(i)) / pr.sqrt_w[i];
        rss += d * d;
    }
    fit.residual_rms = std::sqrt(rss / n);

    const Eigen::Matrix2d info = jac.transpose() * jac;
    Eigen::Matrix2d cov = info.completeOrthogonalDecomposition().pseudoInverse();
    if (!weighted) cov *= rss / std::max(1.0, n - 2.0);
    fit.covariance = 0.5 * (cov + cov.transpose());

    const double t_max = *std::max_element(pr.t.begin(), pr.t.end());
    if (fit.converged) {
        if (fit.T_us > 10.0 * t_max) {
            fit.converged = false;
            fit.diagnostic = "no decay in window";
        } else if (fit.r <= kMinExponent + 1e-9 || fit.r >= kMaxExponent - 1e-9) {
            fit.converged = false;
            fit.diagnostic = "exponent at bound";
        } else if (!fit.covariance.allFinite()) {
            fit.converged = false;
            fit.diagnostic = "singular information matrix";
        }
    }
}

void check_inputs(std::span<const double> times, std::span<const double> values,
                  std::span<const double> sigmas) {
    if (times.size() != values.size()) throw ParameterError("fit: times and values differ in length");
    if (times.size() < 6) throw ParameterError("fit: at least 6 points required");
    if (!sigmas.empty() && sigmas.size() != values.size()) {
        throw ParameterError("fit: sigmas must match values in length");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || times[i] < 0.0 || !std::isfinite(values[i])) {
            throw ParameterError("fit: times must be finite and >= 0, values finite");
        }
        if (!sigmas.empty() && !(sigmas[i] > 0.0)) throw ParameterError("fit: sigmas must be > 0");
    }
}

}  // namespace

FitResult fit_model(const DecayModel& model, std::span<const double> times,
                    std::span<const double> values, std::span<const double> sigmas) {
    check_inputs(times, values, sigmas);
    Problem pr{model, times, values, std::vector<double>(times.size(), 1.0)};
    if (!sigmas.empty()) {
        for (std::size_t i = 0; i < sigmas.size(); ++i) pr.sqrt_w[i] = 1.0 / sigmas[i];
    }

    FitResult best;
    double best_cost = std::numeric_limits<double>::infinity();
    bool have_converged = false;
    for (double r0 : {1.0, 1.5, 2.0}) {
        const double T0 = crossing_time(pr, r0);
        FitResult f = levenberg_marquardt(pr, T0, r0);
        finalize(pr, f, !sigmas.empty());
        Eigen::VectorXd res;
        const double c = evaluate(pr, std::log(f.T_us), f.r, res, nullptr);
        const bool better = (f.converged && !have_converged) ||
                            (f.converged == have_converged && c < best_cost);
        if (better) {
            best = f;
            best_cost = c;
            have_converged = have_converged || f.converged;
        }
    }
    return best;
}

FitResult fit_stretched_exp(std::span<const double> times, std::span<const double> values,
                            std::span<const double> sigmas) {
    for (double v : values) {
        if (v < -0.2 || v > 1.2) {
            throw ParameterError(fmt::format("fit_stretched_exp: value {} outside [-0.2, 1.2]", v));
        }
    }
    return fit_model(DecayModel::stretched_exp(), times, values, sigmas);
}

FitResult fit_sigma_model(std::span<const double> times, std::span<const double> neg_sigma,
                          int order, SigmaModel model, std::span<const double> sigmas) {
    return fit_model(DecayModel::sigma(order, model), times, neg_sigma, sigmas);
}

std::vector<double> accumulated_error(const SampledCurve& driven, const SampledCurve& nondriven) {
    if (driven.t.size() != driven.y.size() || nondriven.t.size() != nondriven.y.size()) {
        throw ParameterError("accumulated_error: curve times and values differ in length");
    }
    if (driven.t.size() != nondriven.t.size()) {
        throw ParameterError("accumulated_error: curves are on different grids");
    }
    std::vector<double> acc(driven.t.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < driven.t.size(); ++j) {
        if (std::abs(driven.t[j] - nondriven.t[j]) > 1e-12 * std::max(1.0, std::abs(driven.t[j]))) {
            throw ParameterError("accumulated_error: curves are on different grids");
        }
        sum += std::abs(driven.y[j] - nondriven.y[j]);
        acc[j] = sum;
    }
    return acc;
}

MethodCurves method_curves(const SignalSeries& series, std::size_t stride, std::size_t points) {
    if (stride == 0) throw ParameterError("method_curves: stride must be >= 1");
    if (3 * stride * points >= series.size()) {
        throw ParameterError(fmt::format(
            "method_curves: series of {} points cannot supply 3 x {} x {} grid steps",
            series.size(), points, stride));
    }
    const auto w2 = sigma_weights(2).as_double();
    const auto w3 = sigma_weights(3).as_double();
    const auto& R = series.mean_sx;
    MethodCurves c;
    for (std::size_t j = 0; j <= points; ++j) {
        const std::size_t i = j * stride;
        const double t = series.times_us[i];
        const double s2 = w2[0] * R[0] + w2[1] * R[i] + w2[2] * R[2 * i];
        const double s3 = w3[0] * R[0] + w3[1] * R[i] + w3[2] * R[2 * i] + w3[3] * R[3 * i];
        c.ramsey.t.push_back(t);
        c.ramsey.y.push_back(R[i]);
        c.sigma2.t.push_back(t);
        c.sigma2.y.push_back(-s2);
        c.sigma3.t.push_back(t);
        c.sigma3.y.push_back(-s3);
    }
    return c;
}

namespace {

constexpr std::uint64_t kSweepStream = 0x73776565ULL;     // "swee"
constexpr std::uint64_t kNonDrivenStream = 0x6e6f6e64ULL;  // "nond"

MethodStats summarize(const std::string& name, const std::vector<FitResult>& fits) {
    MethodStats st;
    st.method = name;
    std::vector<double> T, r;
    for (const auto& f : fits) {
        if (f.converged) {
            T.push_back(f.T_us);
            r.push_back(f.r);
        } else {
            ++st.n_excluded;
        }
    }
    st.n_converged = static_cast<int>(T.size());
    auto mean_sem = [](const std::vector<double>& v, double& mean, double& sem) {
        const auto n = static_cast<double>(v.size());
        mean = sem = std::nan("");
        if (v.empty()) return;
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        if (v.size() < 2) return;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sem = std::sqrt(ss / (n - 1.0) / n);
    };
    mean_sem(T, st.T_mean, st.T_sem);
    mean_sem(r, st.r_mean, st.r_sem);
    return st;
}

std::vector<double> drop_first(const std::vector<double>& v) { return {v.begin() + 1, v.end()}; }

}  // namespace

SweepResult t2_sweep(const SequenceSpec& base, std::span<const double> drive_grid, int repeats,
                     const SweepOptions& opt) {
    if (repeats < 5) throw ParameterError(fmt::format("t2_sweep needs >= 5 repeats, got {}", repeats));
    if (drive_grid.empty()) throw ParameterError("t2_sweep needs a non-empty drive grid");
    if (opt.fit_points < 6) throw ParameterError("t2_sweep needs >= 6 fit points");
    const std::size_t stride = grid_index(base, opt.window_us / static_cast<double>(opt.fit_points));
    if (stride == 0) throw ParameterError("t2_sweep: fit grid spacing is below sequence.dt_us");
    const double duration = 3.0 * opt.window_us;

    SweepResult out;
    out.t2_ref_us = opt.t2_ref_us;
    out.repeats = repeats;
    for (double drive : drive_grid) {
        std::array<std::vector<FitResult>, 3> fits;
        for (int m = 0; m < repeats; ++m) {
            SequenceSpec spec = base;
            spec.drive_mhz = drive;
            spec.master_seed = derive_seed(base.master_seed, kSweepStream, static_cast<std::uint64_t>(m));
            auto series = run_ensemble(spec, duration, opt.workers);
            if (spec.sigma_meas > 0.0) series = add_measurement_noise(series, spec);

            const auto c = method_curves(series, stride, opt.fit_points);
            // Contrast of the clean Ramsey record across the window.
            const auto [lo, hi] = std::minmax_element(c.ramsey.y.begin(), c.ramsey.y.end());
            if (*hi - *lo < 0.2) {
                throw ParameterError(fmt::format(
                    "t2_sweep: Ramsey contrast {} < 0.2 at drive {} MHz", *hi - *lo, drive));
            }
            const bool weighted = std::all_of(series.sem.begin(), series.sem.end(),
                                              [](double s) { return s > 0.0; });
            std::vector<double> ramsey_sem;
            if (weighted) {
                for (std::size_t j = 0; j <= opt.fit_points; ++j) ramsey_sem.push_back(series.sem[j * stride]);
            }
            auto safe_fit = [](auto&& fn) {
                try {
                    return fn();
                } catch (const ParameterError& e) {
                    FitResult f;
                    f.diagnostic = e.what();
                    return f;
                }
            };
            fits[0].push_back(safe_fit([&] { return fit_stretched_exp(c.ramsey.t, c.ramsey.y, ramsey_sem); }));
            const auto t = drop_first(c.sigma2.t);
            fits[1].push_back(safe_fit([&] {
                return fit_sigma_model(t, drop_first(c.sigma2.y), 2, opt.model);
            }));
            fits[2].push_back(safe_fit([&] {
                return fit_sigma_model(t, drop_first(c.sigma3.y), 3, opt.model);
            }));
        }
        SweepPoint p;
        p.drive_mhz = drive;
        p.ramsey = summarize("ramsey", fits[0]);
        p.sigma2 = summarize("sigma2", fits[1]);
        p.sigma3 = summarize("sigma3", fits[2]);
        for (int k = 0; k < 3; ++k) {
            const auto& st = p.method(k);
            if (st.n_excluded * 5 > repeats && !out.failed) {
                out.failed = true;
                out.failure = fmt::format("{} fits at drive {} MHz: {} of {} did not converge",
                                          st.method, drive, st.n_excluded, repeats);
            }
        }
        out.points.push_back(p);
    }
    return out;
}

AccErrTable accumulated_error_scan(const SequenceSpec& spec, double t2_ref_us, std::size_t points,
                                   double t_norm_max, unsigned workers) {
    if (!(t2_ref_us > 0.0) || points < 1 || !(t_norm_max > 0.0)) {
        throw ParameterError("accumulated_error_scan needs t2_ref > 0, points >= 1, t_norm_max > 0");
    }
    const double spacing = t_norm_max * t2_ref_us / static_cast<double>(points);
    const std::size_t stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spacing / spec.dt_us)));
    const double duration = 3.0 * static_cast<double>(stride * points) * spec.dt_us;

    auto driven_series = run_ensemble(spec, duration, workers);
    SequenceSpec still = spec;
    still.drive_mhz = 0.0;
    still.master_seed = derive_seed(spec.master_seed, kNonDrivenStream, 0);
    auto still_series = run_ensemble(still, duration, workers);
    if (spec.sigma_meas > 0.0) {
        driven_series = add_measurement_noise(driven_series, spec);
        still_series = add_measurement_noise(still_series, still);
    }
    const auto d = method_curves(driven_series, stride, points);
    const auto n = method_curves(still_series, stride, points);

    AccErrTable t;
    for (double x : d.ramsey.t) t.t_norm.push_back(x / t2_ref_us);
    t.ramsey = accumulated_error(d.ramsey, n.ramsey);
    t.sigma2 = accumulated_error(d.sigma2, n.sigma2);
    t.sigma3 = accumulated_error(d.sigma3, n.sigma3);
    return t;
}

std::vector<PurityRow> purity_comparison(const SequenceSpec& spec, double drive_mhz,
                                         double t_max_us, std::size_t points,
                                         double max_purity_loss, unsigned workers) {
    if (points < 1 || !(t_max_us > 0.0)) throw ParameterError("purity_comparison needs t_max > 0 and points >= 1");
    SequenceSpec s = spec;
    s.drive_mhz = drive_mhz;
    s.sigma_meas = 0.0;
    const std::size_t stride = grid_index(s, t_max_us / static_cast<double>(points));
    if (stride == 0) throw ParameterError("purity_comparison: grid spacing is below sequence.dt_us");
    const auto rec = simulate_ensemble(s, 3.0 * t_max_us, workers);
    const auto tomo = rec.tomography();
    const auto c = method_curves(rec.signal(), stride, points);

    std::vector<PurityRow> rows;
    for (std::size_t j = 0; j <= points; ++j) {
        const double dp = tomo.purity_loss[j * stride];
        if (dp > max_purity_loss) break;
        rows.push_back({c.ramsey.t[j], dp, c.sigma2.y[j], c.sigma3.y[j]});
    }
    return rows;
}

void write_fits_csv(std::ostream& os, const SweepResult& sweep) {
    os << "method,drive_mhz,T_us,r,T_sem,r_sem,n_converged\n";
    for (int k = 0; k < 3; ++k) {
        for (const auto& p : sweep.points) {
            const auto& st = p.method(k);
            fmt::print(os, "{},{},{},{},{},{},{}\n", st.method, p.drive_mhz, st.T_mean, st.r_mean,
                       st.T_sem, st.r_sem, st.n_converged);
        }
    }
}

void write_accerr_csv(std::ostream& os, const AccErrTable& t) {
    os << "t_norm,A_ramsey,A_sigma2,A_sigma3\n";
    for (std::size_t i = 0; i < t.t_norm.size(); ++i) {
        fmt::print(os, "{},{},{},{}\n", t.t_norm[i], t.ramsey[i], t.sigma2[i], t.sigma3[i]);
    }
}

void write_purity_csv(std::ostream& os, const std::vector<PurityRow>& rows) {
    os << "t_us,dP,neg_sigma2,neg_sigma3\n";
    for (const auto& r : rows) fmt::print(os, "{},{},{},{}\n", r.t_us, r.dP, r.neg_sigma2, r.neg_sigma3);
}

}  // namespace sigman
