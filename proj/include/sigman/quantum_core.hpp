#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <complex>

namespace sigman {

using Bloch = Eigen::Vector3d;
using Matrix2c = Eigen::Matrix2cd;

/// Single-qubit state. Stored as a Bloch vector; rho = (I + a.sigma) / 2.
///
/// Conventions: the ground (pumped) pole is +z, rotations follow the right-hand
/// rule, so a +y rotation by pi/2 takes (1,0,0) to (0,0,-1).
class QubitState {
public:
    static QubitState from_bloch(const Bloch& a);
    static QubitState from_density(const Matrix2c& rho);
    /// (1,0,0): the state prepared by the ideal pi/2 pulse.
    static QubitState plus_x() { return QubitState(Bloch(1.0, 0.0, 0.0)); }
    static QubitState maximally_mixed() { return QubitState(Bloch::Zero()); }

    const Bloch& bloch() const { return a_; }
    Matrix2c density() const;

    /// tr(rho^2) = (1 + |a|^2) / 2
    double purity() const { return 0.5 * (1.0 + a_.squaredNorm()); }
    double purity_loss() const { return 1.0 - purity(); }

private:
    explicit QubitState(const Bloch& a) : a_(a) {}
    Bloch a_;
};

/// <sigma_x> = a_x. This is the fidelity convention used for R_k.
inline double projection_fidelity(const QubitState& s) { return s.bloch().x(); }

/// tr(rho_ref rho) = (1 + a_ref . a); requires a pure reference.
double trace_fidelity(const QubitState& state, const QubitState& reference);

/// Exact rotation of the Bloch vector by `angle` (rad) about the unit `axis`.
QubitState apply_unitary_step(const QubitState& state, const Eigen::Vector3d& axis, double angle);

/// Exact time-dt amplitude damping toward +z (rate gamma_pump) composed with pure
/// dephasing (rate gamma_phi). Rates are cyclic MHz, dt in us.
QubitState apply_dissipative_step(const QubitState& state, double gamma_pump_mhz,
                                  double gamma_phi_mhz, double dt_us);

/// One integration step: rotation about `axis` by `angle`, with dissipation
/// at the given rates over `dt_us`.
struct ChannelStep {
    Eigen::Vector3d axis{0.0, 1.0, 0.0};
    double angle = 0.0;
    double gamma_pump_mhz = 0.0;
    double gamma_phi_mhz = 0.0;
    double dt_us = 0.0;

    void validate() const;
};

/// Strang splitting: half dissipative step, rotation, half dissipative step.
QubitState apply_channel_step(const QubitState& state, const ChannelStep& step);

namespace detail {

/// Precomputed multipliers of an exact dissipative step.
struct DissipationFactors {
    double transverse = 1.0;
    double longitudinal = 1.0;

    DissipationFactors() = default;
    DissipationFactors(double gamma_pump_mhz, double gamma_phi_mhz, double dt_us);

    void apply(Bloch& a) const {
        a.x() *= transverse;
        a.y() *= transverse;
        a.z() = 1.0 + (a.z() - 1.0) * longitudinal;
    }
};

/// Rodrigues rotation about a unit axis given cos/sin of the angle.
inline void rotate(Bloch& a, const Eigen::Vector3d& k, double c, double s) {
    const Eigen::Vector3d kxa = k.cross(a);
    const double kda = k.dot(a);
    a = a * c + kxa * s + k * (kda * (1.0 - c));
}

}  // namespace detail
}  // namespace sigman
