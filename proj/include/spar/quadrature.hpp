#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace spar {

// Gauss-Hermite rule of order n for the weight e^{-x^2} on the real line.
// Nodes are eigenvalues of the Jacobi matrix.  Weights are produced in log
// form through the Christoffel numbers,
//   1/w_j = sum_k s_k(x_j)^2,  s_k orthonormal Hermite,
// with the three-term recurrence rescaled on the fly; the raw weights
// underflow past a few hundred nodes while their logs stay representable.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> log_weights;
};

inline GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: order must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd offdiag(n - 1 > 0 ? n - 1 : 0);
  for (int j = 1; j < n; ++j) offdiag(j - 1) = std::sqrt(0.5 * j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, offdiag, Eigen::EigenvaluesOnly);
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.log_weights.resize(n);
  constexpr double quarter_log_pi = 0.28618247146235004;  // log(pi)/4
  for (int j = 0; j < n; ++j) {
    const double x = solver.eigenvalues()(j);
    rule.nodes[j] = x;
    // sum of squares of orthonormal Hermite values at x, tracked as
    // scale^2 * sum s_k^2 with log_scale adjusted whenever the recurrence
    // grows; s_0 = pi^{-1/4}.
    double log_scale = 0.0;
    double prev = 0.0;
    double cur = std::exp(-quarter_log_pi);
    double sumsq = cur * cur;
    for (int k = 0; k + 1 < n; ++k) {
      const double c1 = std::sqrt(0.5 * (k + 1));
      const double c0 = std::sqrt(0.5 * k);
      double next = (x * cur - c0 * prev) / c1;
      prev = cur;
      cur = next;
      sumsq += cur * cur;
      const double mag = std::max(std::abs(cur), std::abs(prev));
      if (mag > 1e140) {
        const double s = 1e-140;
        prev *= s;
        cur *= s;
        sumsq *= s * s;
        log_scale += std::log(1e140);
      }
    }
    rule.log_weights[j] = -2.0 * log_scale - std::log(sumsq);
  }
  return rule;
}

// log(sum_i exp(v_i)) without overflow; -inf on an empty or all -inf input.
inline double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace spar
