#include "sigman/liouville_lab.hpp"

#include "sigman/error.hpp"
#include "sigman/protocol_weights.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <numbers>
#include <ostream>

namespace sigman {

namespace {

using C = std::complex<double>;
constexpr C kI{0.0, 1.0};

double norm1(const Matrix4c& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

}  // namespace

Matrix2c pauli_x() {
    Matrix2c m;
    m << 0, 1, 1, 0;
    return m;
}

Matrix2c pauli_y() {
    Matrix2c m;
    m << 0, -kI, kI, 0;
    return m;
}

Matrix2c pauli_z() {
    Matrix2c m;
    m << 1, 0, 0, -1;
    return m;
}

Matrix2c sigma_plus() {
    Matrix2c m;
    m << 0, 1, 0, 0;
    return m;
}

Matrix2c initial_density() { return 0.5 * (Matrix2c::Identity() + pauli_x()); }

Vector4c vectorize(const Matrix2c& rho) {
    return Vector4c(rho(0, 0), rho(1, 0), rho(0, 1), rho(1, 1));
}

Matrix2c unvectorize(const Vector4c& v) {
    Matrix2c m;
    m << v(0), v(2), v(1), v(3);
    return m;
}

Matrix4c kron(const Matrix2c& a, const Matrix2c& b) {
    Matrix4c k;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return k;
}

void ChannelSpec::validate() const {
    if ((hamiltonian - hamiltonian.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
        throw ParameterError("channel Hamiltonian must be Hermitian");
    }
    for (std::size_t j = 0; j < lindblad.size(); ++j) {
        if (!(lindblad[j].rate >= 0.0)) {
            throw ParameterError(fmt::format("Lindblad rate {} must be >= 0, got {}", j,
                                             lindblad[j].rate));
        }
    }
    if (!std::isfinite(x)) throw ParameterError("channel action scale x must be finite");
}

SuperopPair build_superops(const ChannelSpec& spec) {
    spec.validate();
    const Matrix2c id = Matrix2c::Identity();
    const Matrix2c& h = spec.hamiltonian;
    // vec(A rho B) = (B^T kron A) vec(rho)
    const Matrix4c hs = -kI * (kron(id, h) - kron(h.transpose(), id));

    Matrix4c ls = Matrix4c::Zero();
    for (const auto& term : spec.lindblad) {
        const Matrix2c& a = term.op;
        const Matrix2c ada = a.adjoint() * a;
        ls += term.rate *
              (kron(a.conjugate(), a) - 0.5 * kron(id, ada) - 0.5 * kron(ada.transpose(), id));
    }
    return {{hs, SuperopKind::UnitaryGenerator}, {ls, SuperopKind::Dissipator}};
}

Matrix4c expm(const Matrix4c& a) {
    const double n = norm1(a);
    int squarings = 0;
    if (n > 0.25) squarings = static_cast<int>(std::ceil(std::log2(n / 0.25)));
    const Matrix4c scaled = a / std::ldexp(1.0, squarings);

    Matrix4c result = Matrix4c::Identity();
    Matrix4c term = Matrix4c::Identity();
    for (int k = 1; k <= 30; ++k) {
        term = term * scaled / static_cast<double>(k);
        result += term;
        if (norm1(term) <= 1e-18 * norm1(result)) break;
    }
    for (int i = 0; i < squarings; ++i) result = result * result;
    return result;
}

Superoperator propagator(const ChannelSpec& spec) {
    const auto ops = build_superops(spec);
    return {expm(spec.x * (ops.hamiltonian.matrix + ops.dissipator.matrix)), SuperopKind::Propagator};
}

namespace {

double read_out(const Matrix2c& rho, Convention convention) {
    if (convention == Convention::Projection) return (pauli_x() * rho).trace().real();
    return (initial_density() * rho).trace().real();
}

}  // namespace

double exact_rk(const ChannelSpec& spec, int k, Convention convention) {
    if (k < 0) throw ParameterError("exact_rk: k must be >= 0");
    Vector4c v = vectorize(initial_density());
    if (k > 0) {
        const Matrix4c kmat = propagator(spec).matrix;
        for (int i = 0; i < k; ++i) v = kmat * v;
    }
    return read_out(unvectorize(v), convention);
}

double dissipator_expectation(const ChannelSpec& spec, Convention convention) {
    const auto ops = build_superops(spec);
    const Vector4c lrho = ops.dissipator.matrix * vectorize(initial_density());
    return spec.x * read_out(unvectorize(lrho), convention);
}

std::vector<double> geometric_grid(double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi > lo) || points < 2) {
        throw ParameterError("geometric_grid needs 0 < lo < hi and >= 2 points");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    const double step = std::log(hi / lo) / (points - 1);
    for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
    grid.back() = hi;
    return grid;
}

ConvergenceResult convergence_order(const ChannelSpec& spec, int order,
                                    std::span<const double> x_grid, Convention convention) {
    if (x_grid.size() < 6) throw ParameterError("convergence_order needs at least 6 grid points");
    for (double x : x_grid) {
        if (x < 1e-3 * (1 - 1e-12) || x > 0.3 * (1 + 1e-12)) {
            throw ParameterError(fmt::format("convergence grid point {} outside [1e-3, 0.3]", x));
        }
    }
    if (spec.hamiltonian.cwiseAbs().maxCoeff() == 0.0) {
        throw ParameterError("convergence_order needs a nonzero coherent part");
    }
    const auto weights = sigma_weights(order);

    ConvergenceResult res;
    res.order = order;
    for (double x : x_grid) {
        ChannelSpec s = spec;
        s.x = x;
        std::vector<double> r(static_cast<std::size_t>(order) + 1);
        for (int k = 0; k <= order; ++k) r[static_cast<std::size_t>(k)] = exact_rk(s, k, convention);
        const double sigma = combine_sigma(weights, r).value;
        const double expect = dissipator_expectation(s, convention);
        res.points.push_back({x, sigma, expect, std::abs(sigma - expect)});
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& p : res.points) {
        if (p.abs_error < kConvergenceFloor) continue;
        const double lx = std::log(p.x), ly = std::log(p.abs_error);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    if (m < 2) {
        res.at_numerical_floor = true;
        return res;
    }
    res.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return res;
}

ChannelSpec sequence_channel(double drive_mhz, double gamma_pump_mhz, double gamma_phi_mhz,
                             double tau1_us) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (!(drive_mhz >= 0.0) || !(gamma_pump_mhz >= 0.0) || !(gamma_phi_mhz >= 0.0) || !(tau1_us > 0.0)) {
        throw ParameterError("sequence_channel needs drive, rates >= 0 and tau1 > 0");
    }
    ChannelSpec spec;
    spec.hamiltonian = 0.5 * two_pi * drive_mhz * pauli_y();
    if (gamma_pump_mhz > 0.0) spec.lindblad.push_back({sigma_plus(), two_pi * gamma_pump_mhz});
    if (gamma_phi_mhz > 0.0) spec.lindblad.push_back({pauli_z(), 0.5 * two_pi * gamma_phi_mhz});
    spec.x = tau1_us;
    spec.validate();
    return spec;
}

void write_convergence_csv(std::ostream& os, std::span<const ConvergenceResult> results) {
    os << "n,x,sigma_n,L_expect,abs_error\n";
    for (const auto& r : results) {
        for (const auto& p : r.points) {
            fmt::print(os, "{},{},{},{},{}\n", r.order, p.x, p.sigma, p.expectation, p.abs_error);
        }
    }
}

}  // namespace sigman
