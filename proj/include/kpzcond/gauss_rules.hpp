#pragma once

#include <vector>

namespace kpzcond::quad {

/// Nodes and weights of a one-dimensional quadrature rule.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
Rule gauss_legendre(int n);

/// n-point Clenshaw-Curtis rule on [-1, 1] (n >= 2, includes endpoints).
Rule clenshaw_curtis(int n);

/// n-point Gauss-Hermite rule for the standard normal weight, so that
/// sum_i w_i f(x_i) approximates E[f(Z)] with Z ~ N(0, 1). Weights sum to 1.
Rule gauss_hermite_normal(int n);

}  // namespace kpzcond::quad
