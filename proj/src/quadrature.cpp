#include "ntk/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ntk/error.hpp"

namespace ntk {

QuadratureRule golub_welsch_symmetric(const std::vector<double>& offdiag_sq, double mass) {
  const auto n = static_cast<Eigen::Index>(offdiag_sq.size() + 1);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (Eigen::Index j = 0; j + 1 < n; ++j) sub[j] = std::sqrt(offdiag_sq[static_cast<std::size_t>(j)]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("golub_welsch: tridiagonal eigen-solver failed");

  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = solver.eigenvalues()[i];
    // Christoffel sum of squared orthonormal polynomials, rescaled on the fly
    // so that large |x| (Hermite tails) cannot overflow.
    double prev = 0.0, cur = 1.0, sum = 1.0, log_scale = 0.0;
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      const double b_next = sub[j];
      const double b_cur = j > 0 ? sub[j - 1] : 0.0;
      const double next = (x * cur - b_cur * prev) / b_next;
      prev = cur;
      cur = next;
      sum += cur * cur;
      if (sum > 1e200) {
        prev *= 1e-100;
        cur *= 1e-100;
        sum *= 1e-200;
        log_scale += 200.0 * std::log(10.0);
      }
    }
    const auto k = static_cast<std::size_t>(i);
    rule.nodes[k] = x;
    rule.weights[k] = mass / sum * std::exp(-log_scale);
  }
  return rule;
}

QuadratureRule gauss_hermite(int node_count) {
  if (node_count < 1) throw DomainError("gauss_hermite: node_count must be >= 1");
  std::vector<double> b2(static_cast<std::size_t>(node_count - 1));
  for (std::size_t j = 0; j < b2.size(); ++j) b2[j] = static_cast<double>(j + 1);
  return golub_welsch_symmetric(b2, 1.0);
}

QuadratureRule gauss_legendre(int node_count) {
  if (node_count < 1) throw DomainError("gauss_legendre: node_count must be >= 1");
  std::vector<double> b2(static_cast<std::size_t>(node_count - 1));
  for (std::size_t j = 0; j < b2.size(); ++j) {
    const double k = static_cast<double>(j + 1);
    b2[j] = k * k / (4.0 * k * k - 1.0);
  }
  return golub_welsch_symmetric(b2, 2.0);
}

QuadratureRule gauss_legendre(int node_count, double a, double b) {
  QuadratureRule rule = gauss_legendre(node_count);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

}  // namespace ntk
