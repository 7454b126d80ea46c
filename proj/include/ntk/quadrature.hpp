#pragma once

#include <vector>

namespace ntk {

/// Nodes and positive weights of a one-dimensional quadrature rule.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }

  template <class F>
  [[nodiscard]] double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

/// Golub–Welsch for a symmetric Jacobi matrix with zero diagonal.
///
/// `offdiag_sq[j]` is b_{j+1}^2 for j = 0..n-2, `mass` the integral of the
/// weight function. Nodes come from the tridiagonal eigenvalues; weights from
/// the Christoffel function of the orthonormal recurrence.
QuadratureRule golub_welsch_symmetric(const std::vector<double>& offdiag_sq, double mass);

/// Gauss–Hermite, probabilists' convention: weights sum to 1 and the rule
/// computes E_{u~N(0,1)}[f(u)].
QuadratureRule gauss_hermite(int node_count);

/// Gauss–Legendre on [-1, 1] (weights sum to 2).
QuadratureRule gauss_legendre(int node_count);

/// Gauss–Legendre mapped to [a, b].
QuadratureRule gauss_legendre(int node_count, double a, double b);

}  // namespace ntk
