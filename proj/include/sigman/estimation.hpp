#pragma once

#include "sigman/trajectory_sim.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sigman {

struct FitResult {
    double T_us = 0.0;
    double r = 0.0;
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (T, r)
    double residual_rms = 0.0;
    bool converged = false;
    int n_iterations = 0;
    std::string diagnostic;

    double T_err() const { return std::sqrt(covariance(0, 0)); }
    double r_err() const { return std::sqrt(covariance(1, 1)); }
};

inline constexpr double kMinExponent = 0.5;
inline constexpr double kMaxExponent = 3.5;

/// Model for -sigma_n curves.
///   WeightConsistent:    -sum_k a_k^(n) exp[-(k t/T)^r]
///   LiteralCoefficients: third order with 5/3, -5/2, 1, -1/6 (second order
///                        coincides with the weight-consistent model)
enum class SigmaModel { WeightConsistent, LiteralCoefficients };

SigmaModel parse_sigma_model(const std::string& name);
std::string to_string(SigmaModel m);

/// Model of the form c_0 + sum_{m>=1} c_m exp[-(m t/T)^r].
struct DecayModel {
    std::vector<double> coeffs;  // c_0, c_1, ...

    static DecayModel stretched_exp();
    static DecayModel sigma(int order, SigmaModel model);

    double value(double t, double T, double r) const;
};

/// Weighted nonlinear least squares (Levenberg-Marquardt in (log T, r), r kept
/// in [0.5, 3.5]) with starts r in {1, 1.5, 2}. Empty `sigmas` means unweighted.
FitResult fit_model(const DecayModel& model, std::span<const double> times,
                    std::span<const double> values, std::span<const double> sigmas = {});

/// exp[-(t/T)^r]. Needs >= 6 points, values in [-0.2, 1.2].
FitResult fit_stretched_exp(std::span<const double> times, std::span<const double> values,
                            std::span<const double> sigmas = {});

/// Fit of -sigma_n (positive, growing from 0) for order 2 or 3.
FitResult fit_sigma_model(std::span<const double> times, std::span<const double> neg_sigma,
                          int order, SigmaModel model = SigmaModel::WeightConsistent,
                          std::span<const double> sigmas = {});

struct SampledCurve {
    std::vector<double> t;
    std::vector<double> y;
};

/// A(t_m) = sum_{j <= m} |driven(t_j) - nondriven(t_j)|.
std::vector<double> accumulated_error(const SampledCurve& driven, const SampledCurve& nondriven);

/// Ramsey, -sigma_2 and -sigma_3 curves on the tau1 grid `grid_index * dt`.
struct MethodCurves {
    SampledCurve ramsey, sigma2, sigma3;
};

/// Builds the three curves from one signal; index j of the grid reads the
/// signal at j, 2j and 3j grid steps times `stride`.
MethodCurves method_curves(const SignalSeries& series, std::size_t stride, std::size_t points);

struct MethodStats {
    std::string method;
    double T_mean = 0.0;
    double T_sem = 0.0;
    double r_mean = 0.0;
    double r_sem = 0.0;
    int n_converged = 0;
    int n_excluded = 0;
};

struct SweepPoint {
    double drive_mhz = 0.0;
    MethodStats ramsey, sigma2, sigma3;

    const MethodStats& method(int idx) const { return idx == 0 ? ramsey : idx == 1 ? sigma2 : sigma3; }
};

struct SweepOptions {
    double t2_ref_us = 1.0;
    double window_us = 2.0;  // fit window for tau1; signal simulated to 3x this
    std::size_t fit_points = 60;
    SigmaModel model = SigmaModel::WeightConsistent;
    unsigned workers = 1;
};

struct SweepResult {
    double t2_ref_us = 0.0;
    int repeats = 0;
    std::vector<SweepPoint> points;
    bool failed = false;
    std::string failure;
};

/// Repeats the driven Ramsey simulation `repeats` times per drive with
/// independent seeds, fits Ramsey / sigma_2 / sigma_3 and reports mean +- SEM.
/// Repeat m uses the same seed at every drive. More than 20% non-converged
/// fits for any method marks the sweep failed.
SweepResult t2_sweep(const SequenceSpec& base, std::span<const double> drive_grid, int repeats,
                     const SweepOptions& options);

struct AccErrTable {
    std::vector<double> t_norm;
    std::vector<double> ramsey, sigma2, sigma3;
};

/// Driven (spec.drive_mhz) versus non-driven runs on a grid of `points`
/// intervals spanning [0, t_norm_max * t2_ref]; the non-driven run uses an
/// independent seed.
AccErrTable accumulated_error_scan(const SequenceSpec& spec, double t2_ref_us, std::size_t points,
                                   double t_norm_max, unsigned workers);

struct PurityRow {
    double t_us = 0.0;
    double dP = 0.0;
    double neg_sigma2 = 0.0;
    double neg_sigma3 = 0.0;
};

/// Tomographic purity loss of the ensemble state against -sigma_2, -sigma_3
/// with tau1 = t, on `points` intervals up to t_max; truncated before the
/// first point whose purity loss exceeds `max_purity_loss`. No measurement noise.
std::vector<PurityRow> purity_comparison(const SequenceSpec& spec, double drive_mhz,
                                         double t_max_us, std::size_t points,
                                         double max_purity_loss, unsigned workers);

/// Columns: method,drive_mhz,T_us,r,T_sem,r_sem,n_converged
void write_fits_csv(std::ostream& os, const SweepResult& sweep);
/// Columns: t_norm,A_ramsey,A_sigma2,A_sigma3
void write_accerr_csv(std::ostream& os, const AccErrTable& t);
/// Columns: t_us,dP,neg_sigma2,neg_sigma3
void write_purity_csv(std::ostream& os, const std::vector<PurityRow>& rows);

}  // namespace sigman
