#include "sigman/quantum_core.hpp"

#include "sigman/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace sigman {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kStateTol = 1e-12;
constexpr double kBlochTol = 1e-9;
}  // namespace

QubitState QubitState::from_bloch(const Bloch& a) {
    if (!a.allFinite() || a.norm() > 1.0 + kBlochTol) {
        throw ParameterError(fmt::format("Bloch vector ({}, {}, {}) is not a valid state",
                                         a.x(), a.y(), a.z()));
    }
    return QubitState(a);
}

QubitState QubitState::from_density(const Matrix2c& rho) {
    if (std::abs(rho.trace() - 1.0) > kStateTol) {
        throw ParameterError("density matrix must have unit trace");
    }
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > kStateTol) {
        throw ParameterError("density matrix must be Hermitian");
    }
    const Bloch a(2.0 * rho(1, 0).real(), 2.0 * rho(1, 0).imag(),
                  (rho(0, 0) - rho(1, 1)).real());
    return from_bloch(a);
}

Matrix2c QubitState::density() const {
    using C = std::complex<double>;
    Matrix2c rho;
    rho << C(0.5 * (1.0 + a_.z()), 0.0), C(0.5 * a_.x(), -0.5 * a_.y()),
        C(0.5 * a_.x(), 0.5 * a_.y()), C(0.5 * (1.0 - a_.z()), 0.0);
    return rho;
}

double trace_fidelity(const QubitState& state, const QubitState& reference) {
    if (reference.purity() < 1.0 - 1e-9) {
        throw ParameterError(
            fmt::format("trace fidelity needs a pure reference (purity {})", reference.purity()));
    }
    return 0.5 * (1.0 + reference.bloch().dot(state.bloch()));
}

QubitState apply_unitary_step(const QubitState& state, const Eigen::Vector3d& axis, double angle) {
    const double n = axis.norm();
    if (std::abs(n - 1.0) > kBlochTol) {
        throw ParameterError(fmt::format("rotation axis must be a unit vector (|axis| = {})", n));
    }
    Bloch a = state.bloch();
    detail::rotate(a, axis, std::cos(angle), std::sin(angle));
    return QubitState::from_bloch(a);
}

namespace detail {

DissipationFactors::DissipationFactors(double gamma_pump_mhz, double gamma_phi_mhz, double dt_us)
    : transverse(std::exp(-kTwoPi * (0.5 * gamma_pump_mhz + gamma_phi_mhz) * dt_us)),
      longitudinal(std::exp(-kTwoPi * gamma_pump_mhz * dt_us)) {}

}  // namespace detail

QubitState apply_dissipative_step(const QubitState& state, double gamma_pump_mhz,
                                  double gamma_phi_mhz, double dt_us) {
    if (!(gamma_pump_mhz >= 0.0) || !(gamma_phi_mhz >= 0.0)) {
        throw ParameterError("dissipation rates must be >= 0");
    }
    if (!(dt_us >= 0.0)) throw ParameterError("dissipative step duration must be >= 0");
    Bloch a = state.bloch();
    detail::DissipationFactors(gamma_pump_mhz, gamma_phi_mhz, dt_us).apply(a);
    return QubitState::from_bloch(a);
}

void ChannelStep::validate() const {
    if (std::abs(axis.norm() - 1.0) > kBlochTol) {
        throw ParameterError("channel step axis must be a unit vector");
    }
    if (!(gamma_pump_mhz >= 0.0) || !(gamma_phi_mhz >= 0.0)) {
        throw ParameterError("channel step rates must be >= 0");
    }
    if (!(dt_us >= 0.0)) throw ParameterError("channel step duration must be >= 0");
}

QubitState apply_channel_step(const QubitState& state, const ChannelStep& step) {
    step.validate();
    const detail::DissipationFactors half(step.gamma_pump_mhz, step.gamma_phi_mhz, 0.5 * step.dt_us);
    Bloch a = state.bloch();
    half.apply(a);
    detail::rotate(a, step.axis, std::cos(step.angle), std::sin(step.angle));
    half.apply(a);
    return QubitState::from_bloch(a);
}

}  // namespace sigman
