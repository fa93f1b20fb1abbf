#pragma once

// Gauss rules used to integrate over a single coupling: Gauss-Hermite for the
// standard normal law and Gauss-Legendre for the uniform law. Nodes come from
// the Golub-Welsch eigenproblem, polished by Newton steps on the three-term
// recurrence, with Christoffel weights normalized to sum to one so a
// rule reads directly as a discrete probability law.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "qsklab/error.hpp"

namespace qsklab {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

// Orthonormal recurrence b_k p_k = x p_{k-1} - b_{k-1} p_{k-2}; returns the
// unnormalized top polynomial, its derivative and sum_{k<n} p_k(x)^2.
struct RecurrenceValue {
  double top, top_derivative, christoffel;
};

inline RecurrenceValue evaluate_recurrence(const Eigen::VectorXd& b, double x) {
  const auto n = b.size() + 1;
  double p_prev = 0.0, p = 1.0, d_prev = 0.0, d = 0.0, sum = 1.0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    const double b_prev = k >= 2 ? b(k - 2) : 0.0;
    const double scale = k < n ? b(k - 1) : 1.0;
    const double p_next = (x * p - b_prev * p_prev) / scale;
    const double d_next = (p + x * d - b_prev * d_prev) / scale;
    p_prev = p;
    p = p_next;
    d_prev = d;
    d = d_next;
    if (k < n) sum += p * p;
  }
  return {p, d, sum};
}

inline QuadratureRule golub_welsch(const Eigen::VectorXd& off_diagonal, double scale) {
  const auto n = off_diagonal.size() + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    jacobi(k, k + 1) = off_diagonal(k);
    jacobi(k + 1, k) = off_diagonal(k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numerical_failure("Golub-Welsch eigensolve failed");

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double x = es.eigenvalues()(k);
    for (int it = 0; it < 3; ++it) {
      const auto v = evaluate_recurrence(off_diagonal, x);
      if (v.top_derivative == 0.0) break;
      x -= v.top / v.top_derivative;
    }
    rule.nodes[k] = x;
    rule.weights[k] = 1.0 / evaluate_recurrence(off_diagonal, x).christoffel;
  }
  // Symmetric weight functions: enforce exact mirror symmetry of the rule.
  for (Eigen::Index k = 0; k < n / 2; ++k) {
    const auto m = n - 1 - k;
    const double x = 0.5 * (rule.nodes[m] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[k] + rule.weights[m]);
    rule.nodes[k] = -x;
    rule.nodes[m] = x;
    rule.weights[k] = rule.weights[m] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (auto& w : rule.weights) w /= total;
  for (auto& x : rule.nodes) x *= scale;
  return rule;
}

}  // namespace detail

/// Gauss-Hermite rule for the standard normal density (probabilists' weight).
inline QuadratureRule gauss_hermite(int n_nodes) {
  if (n_nodes < 1) throw invalid_argument("quadrature needs at least one node");
  if (n_nodes == 1) return {{0.0}, {1.0}};
  Eigen::VectorXd off(n_nodes - 1);
  for (int k = 1; k < n_nodes; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  return detail::golub_welsch(off, 1.0);
}

/// Gauss-Legendre rule for the uniform law on [-a, a].
inline QuadratureRule gauss_legendre(int n_nodes, double half_width) {
  if (n_nodes < 1) throw invalid_argument("quadrature needs at least one node");
  if (n_nodes == 1) return {{0.0}, {1.0}};
  Eigen::VectorXd off(n_nodes - 1);
  for (int k = 1; k < n_nodes; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::golub_welsch(off, half_width);
}

}  // namespace qsklab
