#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sigman {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr int kMaxSigmaOrder = 12;

/// Weights a_0..a_n of the order-n sigma combination, held as exact rationals.
///
/// The weights are the first-derivative finite-difference coefficients at node 0
/// on the nodes 0, 1, ..., n: they sum to zero and their first moment is one.
class WeightVector {
public:
    WeightVector(int order, std::vector<Rational> weights);

    int order() const { return order_; }
    const std::vector<Rational>& exact() const { return weights_; }
    std::vector<double> as_double() const;
    std::size_t size() const { return weights_.size(); }

    /// Variance amplification sum_k a_k^2 for independent unit-variance inputs.
    double variance_gain() const;

private:
    int order_;
    std::vector<Rational> weights_;
};

struct SigmaEstimate {
    int order = 0;
    double value = 0.0;
    double uncertainty = 0.0;
};

/// R_0..R_n sampled at multiples of tau1, plus the sigma values built from them.
struct FidelitySeries {
    double tau1_us = 0.0;
    int order = 0;
    std::vector<double> r_values;
    std::vector<double> r_sem;
    std::vector<SigmaEstimate> sigmas;  // orders 1..order

    const SigmaEstimate& sigma(int n) const;
};

/// (n+1)x(n+1) Vandermonde matrix on nodes 0..n; row i holds i^0 .. i^n.
std::vector<std::vector<std::int64_t>> vandermonde_matrix(int n);

/// Second row (1-based) of the inverse Vandermonde matrix, by exact elimination.
WeightVector sigma_weights(int n);

/// sum_k a_k R_k. When per-point standard errors are given the uncertainty is
/// propagated as sqrt(sum_k a_k^2 u_k^2), treating the R_k as independent.
SigmaEstimate combine_sigma(const WeightVector& weights, std::span<const double> r_values,
                            std::span<const double> r_sem = {});

}  // namespace sigman
