#pragma once

#include "sigman/quantum_core.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace sigman {

using Matrix4c = Eigen::Matrix4cd;
using Vector4c = Eigen::Vector4cd;

/// Fidelity convention: projection uses <sigma_x>, trace uses tr(rho_0 rho).
enum class Convention { Projection, Trace };

enum class SuperopKind { UnitaryGenerator, Dissipator, Propagator };

/// 4x4 matrix acting on column-stacked density matrices.
struct Superoperator {
    Matrix4c matrix;
    SuperopKind kind;
};

struct LindbladTerm {
    Matrix2c op;
    double rate = 0.0;
};

/// Dimensionless Hamiltonian and jump operators; the propagator is exp(x * G).
struct ChannelSpec {
    Matrix2c hamiltonian = Matrix2c::Zero();
    std::vector<LindbladTerm> lindblad;
    double x = 1.0;

    void validate() const;
};

struct SuperopPair {
    Superoperator hamiltonian;  // rho -> -i[H, rho]
    Superoperator dissipator;   // sum_j g_j (A rho A^+ - {A^+A, rho}/2)
};

Matrix2c pauli_x();
Matrix2c pauli_y();
Matrix2c pauli_z();
/// |+z><-z|: lowers toward the +z (ground) pole.
Matrix2c sigma_plus();

/// (I + sigma_x)/2
Matrix2c initial_density();

/// Column-stacking vec().
Vector4c vectorize(const Matrix2c& rho);
Matrix2c unvectorize(const Vector4c& v);
/// Kronecker product of 2x2 matrices.
Matrix4c kron(const Matrix2c& a, const Matrix2c& b);

SuperopPair build_superops(const ChannelSpec& spec);

/// Matrix exponential by scaling and squaring around a Taylor core.
Matrix4c expm(const Matrix4c& a);

/// K = exp(x * (H_super + L_super)).
Superoperator propagator(const ChannelSpec& spec);

/// R_k from K^k applied to (I + sigma_x)/2.
double exact_rk(const ChannelSpec& spec, int k, Convention convention);

/// Projection: x tr(sigma_x L(rho_0)); trace: x tr(rho_0 L(rho_0)).
double dissipator_expectation(const ChannelSpec& spec, Convention convention);

struct ConvergencePoint {
    double x = 0.0;
    double sigma = 0.0;
    double expectation = 0.0;
    double abs_error = 0.0;
};

struct ConvergenceResult {
    int order = 0;
    std::vector<ConvergencePoint> points;
    std::optional<double> slope;  // empty when every error sits at the numerical floor
    bool at_numerical_floor = false;
};

inline constexpr double kConvergenceFloor = 1e-13;

/// Log-log least-squares slope of |sigma_n(x) - <L>(x)| over the grid, with x
/// replacing spec.x. Grid must lie in [1e-3, 0.3] with at least 6 points and
/// the Hamiltonian must be nonzero.
ConvergenceResult convergence_order(const ChannelSpec& spec, int order,
                                    std::span<const double> x_grid,
                                    Convention convention = Convention::Projection);

std::vector<double> geometric_grid(double lo, double hi, int points);

/// Deterministic channel of one tau1 block of the driven Ramsey sequence:
/// H = 2 pi f sigma_y / 2 (1/us), pumping sigma_plus at 2 pi gamma_pump,
/// dephasing sigma_z at pi gamma_phi, x = tau1.
ChannelSpec sequence_channel(double drive_mhz, double gamma_pump_mhz, double gamma_phi_mhz,
                             double tau1_us);

/// Columns: n,x,sigma_n,L_expect,abs_error
void write_convergence_csv(std::ostream& os, std::span<const ConvergenceResult> results);

}  // namespace sigman
