#include "sigman/protocol_weights.hpp"

#include "sigman/error.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace sigman {
namespace {

void check_order(int n) {
    if (n < 1 || n > kMaxSigmaOrder) {
        throw ParameterError("sigma order must lie in [1, " + std::to_string(kMaxSigmaOrder) +
                             "], got " + std::to_string(n));
    }
}

// Gauss-Jordan inverse over the rationals. Vandermonde on distinct nodes is
// nonsingular, so a nonzero pivot always exists.
std::vector<std::vector<Rational>> invert(std::vector<std::vector<Rational>> a) {
    const std::size_t m = a.size();
    std::vector<std::vector<Rational>> inv(m, std::vector<Rational>(m, Rational(0)));
    for (std::size_t i = 0; i < m; ++i) inv[i][i] = 1;

    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        while (a[pivot][col] == 0) ++pivot;
        std::swap(a[pivot], a[col]);
        std::swap(inv[pivot], inv[col]);

        const Rational p = a[col][col];
        for (std::size_t j = 0; j < m; ++j) {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for (std::size_t row = 0; row < m; ++row) {
            if (row == col || a[row][col] == 0) continue;
            const Rational f = a[row][col];
            for (std::size_t j = 0; j < m; ++j) {
                a[row][j] -= f * a[col][j];
                inv[row][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

}  // namespace

WeightVector::WeightVector(int order, std::vector<Rational> weights)
    : order_(order), weights_(std::move(weights)) {
    check_order(order_);
    if (weights_.size() != static_cast<std::size_t>(order_) + 1) {
        throw ParameterError("weight vector of order " + std::to_string(order_) + " needs " +
                             std::to_string(order_ + 1) + " entries");
    }
}

std::vector<double> WeightVector::as_double() const {
    std::vector<double> out;
    out.reserve(weights_.size());
    for (const auto& w : weights_) out.push_back(static_cast<double>(w));
    return out;
}

double WeightVector::variance_gain() const {
    Rational s = 0;
    for (const auto& w : weights_) s += w * w;
    return static_cast<double>(s);
}

const SigmaEstimate& FidelitySeries::sigma(int n) const {
    if (n < 1 || n > static_cast<int>(sigmas.size())) {
        throw ParameterError("sigma order " + std::to_string(n) + " not available (max " +
                             std::to_string(sigmas.size()) + ")");
    }
    return sigmas[static_cast<std::size_t>(n - 1)];
}

std::vector<std::vector<std::int64_t>> vandermonde_matrix(int n) {
    check_order(n);
    const auto m = static_cast<std::size_t>(n) + 1;
    std::vector<std::vector<std::int64_t>> v(m, std::vector<std::int64_t>(m));
    for (std::size_t i = 0; i < m; ++i) {
        std::int64_t p = 1;
        for (std::size_t j = 0; j < m; ++j) {
            v[i][j] = p;
            p *= static_cast<std::int64_t>(i);
        }
    }
    return v;
}

WeightVector sigma_weights(int n) {
    const auto v = vandermonde_matrix(n);
    std::vector<std::vector<Rational>> a(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (auto x : v[i]) a[i].emplace_back(x);
    }
    auto inv = invert(std::move(a));
    // Row 2 in 1-based indexing: the coefficients of the linear term of the
    // interpolating polynomial, i.e. the derivative at node 0.
    return WeightVector(n, std::move(inv[1]));
}

SigmaEstimate combine_sigma(const WeightVector& weights, std::span<const double> r_values,
                            std::span<const double> r_sem) {
    if (r_values.size() != weights.size()) {
        throw ParameterError("combine_sigma: expected " + std::to_string(weights.size()) +
                             " fidelities for order " + std::to_string(weights.order()) +
                             ", got " + std::to_string(r_values.size()));
    }
    if (!r_sem.empty() && r_sem.size() != weights.size()) {
        throw ParameterError("combine_sigma: uncertainty length does not match fidelities");
    }
    const auto a = weights.as_double();
    double value = 0.0;
    double var = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        value += a[k] * r_values[k];
        if (!r_sem.empty()) var += a[k] * a[k] * r_sem[k] * r_sem[k];
    }
    return {weights.order(), value, std::sqrt(var)};
}

}  // namespace sigman
