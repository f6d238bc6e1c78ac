#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "spar/quadrature.hpp"

namespace spar {

inline constexpr double k_two_pi = 6.283185307179586476925286766559;

// Exact p-moment of a closed-form solution, finite or not, with the
// quadrature bookkeeping when numerical integration was involved.
struct MomentValue {
  bool finite = false;
  double value = 0;        // meaningful iff finite
  double log_value = 0;    // log of value, safe for very large moments
  double blowup_time = std::numeric_limits<double>::infinity();
  struct Detail {
    int nodes = 0;         // quadrature nodes at convergence
    std::int64_t n_max = 0;  // largest mode-sum truncation used
    double est_error = 0;  // relative change at the last node doubling
  } detail;
};

// Complex-valued solution of the whole-line model at one point, given the
// driving Wiener value w at time t:
//   v = D^{-1/2} exp{ -(x + i mu w)^2 / (2 D) },  D = 1 + (2 + mu^2) t.
// Real and imaginary parts are the two field components.
inline std::complex<double> line_solution(double x, double t, double mu, double w) {
  const double D = 1 + (2 + mu * mu) * t;
  const std::complex<double> z(x, mu * w);
  return std::exp(-z * z / (2 * D)) / std::sqrt(D);
}

inline double line_blowup_time(double mu, double p) {
  const double denom = p * mu * mu - 2 - mu * mu;
  if (denom > 0) return 1 / denom;
  return std::numeric_limits<double>::infinity();
}

// p-moment of |line_solution| over the Gaussian law of w ~ Normal(0, t),
// evaluated in closed form:
//   E|v|^p = D^{-p/2} e^{-p x^2/(2D)} (1 - kappa)^{-1/2},  kappa = p mu^2 t / D,
// finite exactly when kappa < 1.
inline MomentValue line_moment(double x, double t, double mu, double p) {
  MomentValue out;
  const double D = 1 + (2 + mu * mu) * t;
  const double kappa = p * mu * mu * t / D;
  out.blowup_time = line_blowup_time(mu, p);
  if (kappa >= 1) return out;
  out.finite = true;
  out.log_value = -0.5 * p * std::log(D) - p * x * x / (2 * D) - 0.5 * std::log1p(-kappa);
  out.value = std::exp(out.log_value);
  return out;
}

// One Fourier mode of the torus model driven by a single Wiener path:
//   v_n = exp{ -f(t) n^2 / 2 - mu n w } exp{ i (lam mu n^2 t + lam n w) },
//   f(t) = 2 + (2 + mu^2 - lam^2) t.
inline double torus_f(double t, double lam, double mu) {
  return 2 + (2 + mu * mu - lam * lam) * t;
}

inline std::complex<double> torus_mode(std::int64_t n, double t, double lam, double mu, double w) {
  const double nn = static_cast<double>(n);
  const double log_mag = -0.5 * torus_f(t, lam, mu) * nn * nn - mu * nn * w;
  const double phase = lam * mu * nn * nn * t + lam * nn * w;
  return std::polar(std::exp(log_mag), phase);
}

struct TruncationOverflow : std::runtime_error {
  std::int64_t required;
  explicit TruncationOverflow(std::int64_t n)
      : std::runtime_error("mode sum needs " + std::to_string(n) +
                           " modes, above the hard cap"),
        required(n) {}
};

inline constexpr std::int64_t k_n_max_cap = 1000000;

// Smallest truncation level whose dropped tail sits e^{-70} below the peak
// summand: f n^2 - 2 mu |n| |w| - max(0, -f + mu^2 w^2 / f) > 70.
inline std::int64_t torus_n_max(double t, double lam, double mu, double w) {
  const double f = torus_f(t, lam, mu);
  if (!(f > 0)) throw std::domain_error("torus_n_max: mode sum diverges, f(t) <= 0");
  const double mw = std::abs(mu * w);
  const double peak = std::max(0.0, -f + mw * mw / f);
  const double disc = mw * mw + f * (peak + 70);
  std::int64_t n = static_cast<std::int64_t>((mw + std::sqrt(disc)) / f);
  if (n > 2) n -= 2;
  else n = 1;
  auto ok = [&](std::int64_t m) {
    const double md = static_cast<double>(m);
    return f * md * md - 2 * mw * md - peak > 70;
  };
  while (!ok(n)) {
    ++n;
    if (n > k_n_max_cap) throw TruncationOverflow(n);
  }
  return n;
}

// Squared spatial L2 norm of the torus solution at time t for one Wiener
// value w: 2 pi sum_{|n| <= n_max} exp{ -f(t) n^2 - 2 mu n w }.
inline double torus_l2_norm_sq(double t, double lam, double mu, double w, std::int64_t n_max) {
  const double f = torus_f(t, lam, mu);
  if (!(f > 0)) throw std::domain_error("torus_l2_norm_sq: mode sum diverges, f(t) <= 0");
  double s = 1;  // n = 0
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const double nn = static_cast<double>(n);
    const double e = -f * nn * nn;
    s += std::exp(e - 2 * mu * nn * w) + std::exp(e + 2 * mu * nn * w);
  }
  return k_two_pi * s;
}

inline double torus_l2_norm_sq(double t, double lam, double mu, double w) {
  return torus_l2_norm_sq(t, lam, mu, w, torus_n_max(t, lam, mu, w));
}

// Same sum in log form, stable for large |mu n w|.
inline double torus_log_l2_norm_sq(double t, double lam, double mu, double w,
                                   std::int64_t n_max) {
  const double f = torus_f(t, lam, mu);
  if (!(f > 0)) throw std::domain_error("torus_log_l2_norm_sq: mode sum diverges, f(t) <= 0");
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(2 * n_max + 1));
  terms.push_back(0.0);
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const double nn = static_cast<double>(n);
    const double e = -f * nn * nn;
    terms.push_back(e - 2 * mu * nn * w);
    terms.push_back(e + 2 * mu * nn * w);
  }
  return std::log(k_two_pi) + log_sum_exp(terms);
}

inline double blowup_time(double lam, double mu, double p) {
  const double eps = lam * lam + (p - 1) * mu * mu - 2;
  if (eps > 0) return 2 / eps;
  return std::numeric_limits<double>::infinity();
}

// p-moment of the spatial L2 norm of the torus solution at time t,
//   E[ (2 pi sum_n |v_n|^2)^{p/2} ],  W_t = sqrt(t) y,  y ~ Normal(0,1),
// by adaptive Gauss-Hermite quadrature after flattening the Gaussian growth
// of the integrand.  Divergence is decided analytically from the predicate
// p mu^2 t / f(t) >= 1, equivalent to t >= blowup_time, never from node
// saturation.
inline MomentValue torus_l2_moment(double t, double lam, double mu, double p) {
  if (!(lam * lam + mu * mu < 2))
    throw std::domain_error("torus_l2_moment: existence requires lam^2 + mu^2 < 2");
  if (!(p >= 2)) throw std::invalid_argument("torus_l2_moment: p must be >= 2");
  if (!(t >= 0)) throw std::invalid_argument("torus_l2_moment: t must be >= 0");
  MomentValue out;
  out.blowup_time = blowup_time(lam, mu, p);
  const double f = torus_f(t, lam, mu);
  const double kappa = p * mu * mu * t / f;
  if (kappa >= 1) return out;

  if (t == 0 || mu == 0) {
    // Deterministic norm; no integration needed.
    const std::int64_t n_max = torus_n_max(t, lam, mu, 0);
    out.finite = true;
    out.log_value = 0.5 * p * torus_log_l2_norm_sq(t, lam, mu, 0, n_max);
    out.value = std::exp(out.log_value);
    out.detail.n_max = n_max;
    return out;
  }

  // Substitution y = s z, s = (1 - kappa)^{-1/2}, cancels the quadratic
  // growth of log E exp against the Gauss-Hermite weight:
  //   E = (s/sqrt(pi)) sum_j w_j exp{ -(s^2-1) z_j^2 + (p/2) log ||u||^2 },
  // with the Wiener value w = sqrt(2 t) s z_j.
  const double s = 1 / std::sqrt(1 - kappa);
  double prev_log = std::numeric_limits<double>::quiet_NaN();
  int nodes = 200;
  const int node_cap = 3200;
  for (;; nodes *= 2) {
    const auto rule = gauss_hermite(nodes);
    std::vector<double> terms(rule.nodes.size());
    std::int64_t n_max_seen = 0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double z = rule.nodes[j];
      const double w = std::sqrt(2 * t) * s * z;
      const std::int64_t n_max = torus_n_max(t, lam, mu, w);
      n_max_seen = std::max(n_max_seen, n_max);
      const double log_norm_sq = torus_log_l2_norm_sq(t, lam, mu, w, n_max);
      terms[j] = rule.log_weights[j] - (s * s - 1) * z * z + 0.5 * p * log_norm_sq;
    }
    constexpr double half_log_pi = 0.57236494292470008707;
    const double log_e = std::log(s) - half_log_pi + log_sum_exp(terms);
    out.detail.nodes = nodes;
    out.detail.n_max = std::max(out.detail.n_max, n_max_seen);
    if (std::isfinite(prev_log)) {
      out.detail.est_error = std::abs(log_e - prev_log);
      if (out.detail.est_error < 1e-8 || nodes >= node_cap) {
        out.finite = true;
        out.log_value = log_e;
        out.value = std::exp(log_e);
        return out;
      }
    }
    prev_log = log_e;
    if (nodes >= node_cap) {
      out.finite = true;
      out.log_value = log_e;
      out.value = std::exp(log_e);
      return out;
    }
  }
}

}  // namespace spar
