#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spar/tensors.hpp"

namespace spar {

// Constant coefficients of a linear second order system of stochastic
// parabolic PDEs for an N component field on R^d or the d-torus, driven by
// K Wiener processes:
//
//   du^a = (a^ij_ab D_i D_j u^b + b^i_ab D_i u^b + c_ab u^b + f_a) dt
//        + (sigma^ik_ab D_i u^b + nu^k_ab u^b + g^k_a) dW^k
//
// a is stored as given; no symmetrization in (i,j) happens here.  The
// quadratic forms downstream only ever see its symmetric part.
template <class Scalar>
struct CoefficientSystem {
  int d = 0;
  int N = 0;
  int K = 0;
  BlockGrid<Scalar> a;               // (i,j) outer, N x N blocks
  BlockGrid<Scalar> sigma;           // (i,k) outer, N x N blocks
  std::vector<Mat<Scalar>> b;        // one N x N block per i
  Mat<Scalar> c;                     // N x N
  std::vector<Mat<Scalar>> nu;       // one N x N block per k
  Scalar bound = Scalar(100);

  static CoefficientSystem zero(int d, int N, int K) {
    CoefficientSystem s;
    s.d = d;
    s.N = N;
    s.K = K;
    s.a = BlockGrid<Scalar>(d, d, N);
    s.sigma = BlockGrid<Scalar>(d, K, N);
    s.b.assign(d, Mat<Scalar>::Zero(N, N));
    s.c = Mat<Scalar>::Zero(N, N);
    s.nu.assign(K, Mat<Scalar>::Zero(N, N));
    return s;
  }

  bool lower_order_terms_vanish() const {
    for (const auto& blk : b)
      if (blk.cwiseAbs().maxCoeff() != Scalar(0)) return false;
    if (c.size() > 0 && c.cwiseAbs().maxCoeff() != Scalar(0)) return false;
    for (const auto& blk : nu)
      if (blk.cwiseAbs().maxCoeff() != Scalar(0)) return false;
    return true;
  }
};

enum class ViolationKind { dimension_mismatch, non_finite_entry, bound_exceeded, bad_parameter };

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct ValidationResult {
  bool ok = true;
  std::vector<Violation> violations;

  void add(ViolationKind kind, std::string detail) {
    ok = false;
    violations.push_back({kind, std::move(detail)});
  }
};

namespace detail {

template <class Scalar>
void check_block(ValidationResult& res, const Mat<Scalar>& blk, int n, Scalar bound,
                 const std::string& name) {
  if (blk.rows() != n || blk.cols() != n) {
    res.add(ViolationKind::dimension_mismatch,
            name + " has shape " + std::to_string(blk.rows()) + "x" + std::to_string(blk.cols()) +
                ", expected " + std::to_string(n) + "x" + std::to_string(n));
    return;
  }
  for (int r = 0; r < n; ++r)
    for (int s = 0; s < n; ++s) {
      const Scalar v = blk(r, s);
      if (!std::isfinite(static_cast<double>(v))) {
        res.add(ViolationKind::non_finite_entry,
                "non-finite entry at " + name + "(alpha=" + std::to_string(r) +
                    ", beta=" + std::to_string(s) + ")");
      } else if (std::abs(v) > bound) {
        res.add(ViolationKind::bound_exceeded,
                "entry exceeds bound at " + name + "(alpha=" + std::to_string(r) +
                    ", beta=" + std::to_string(s) + ")");
      }
    }
}

}  // namespace detail

template <class Scalar>
ValidationResult validate(const CoefficientSystem<Scalar>& sys) {
  ValidationResult res;
  if (sys.d < 1 || sys.N < 1 || sys.K < 1) {
    res.add(ViolationKind::bad_parameter, "d, N, K must all be positive");
    return res;
  }
  if (!(sys.bound > Scalar(0)) || !std::isfinite(static_cast<double>(sys.bound))) {
    res.add(ViolationKind::bad_parameter, "bound must be positive and finite");
    return res;
  }
  if (sys.a.outer_rows != sys.d || sys.a.outer_cols != sys.d)
    res.add(ViolationKind::dimension_mismatch,
            "a has outer shape " + std::to_string(sys.a.outer_rows) + "x" +
                std::to_string(sys.a.outer_cols) + ", expected " + std::to_string(sys.d) + "x" +
                std::to_string(sys.d));
  else
    for (int i = 0; i < sys.d; ++i)
      for (int j = 0; j < sys.d; ++j)
        detail::check_block(res, sys.a(i, j), sys.N, sys.bound,
                            "a(i=" + std::to_string(i) + ", j=" + std::to_string(j) + ")");
  if (sys.sigma.outer_rows != sys.d || sys.sigma.outer_cols != sys.K)
    res.add(ViolationKind::dimension_mismatch,
            "sigma has outer shape " + std::to_string(sys.sigma.outer_rows) + "x" +
                std::to_string(sys.sigma.outer_cols) + ", expected " + std::to_string(sys.d) +
                "x" + std::to_string(sys.K));
  else
    for (int i = 0; i < sys.d; ++i)
      for (int k = 0; k < sys.K; ++k)
        detail::check_block(res, sys.sigma(i, k), sys.N, sys.bound,
                            "sigma(i=" + std::to_string(i) + ", k=" + std::to_string(k) + ")");
  if (static_cast<int>(sys.b.size()) != sys.d)
    res.add(ViolationKind::dimension_mismatch, "b holds " + std::to_string(sys.b.size()) +
                                                   " blocks, expected " + std::to_string(sys.d));
  else
    for (int i = 0; i < sys.d; ++i)
      detail::check_block(res, sys.b[i], sys.N, sys.bound, "b(i=" + std::to_string(i) + ")");
  detail::check_block(res, sys.c, sys.N, sys.bound, "c");
  if (static_cast<int>(sys.nu.size()) != sys.K)
    res.add(ViolationKind::dimension_mismatch, "nu holds " + std::to_string(sys.nu.size()) +
                                                   " blocks, expected " + std::to_string(sys.K));
  else
    for (int k = 0; k < sys.K; ++k)
      detail::check_block(res, sys.nu[k], sys.N, sys.bound, "nu(k=" + std::to_string(k) + ")");
  return res;
}

// Coefficients of the same system expressed in rotated frames x = Q_space x'
// and u = Q_state u'.  The Wiener index is untouched.  Both inputs must be
// orthogonal to 1e-12.
template <class Scalar>
CoefficientSystem<Scalar> change_basis(const CoefficientSystem<Scalar>& sys,
                                       const Mat<Scalar>& Q_space, const Mat<Scalar>& Q_state) {
  const Scalar tol = Scalar(1e-12);
  if (Q_space.rows() != sys.d || Q_space.cols() != sys.d || Q_state.rows() != sys.N ||
      Q_state.cols() != sys.N)
    throw std::invalid_argument("change_basis: transform shapes do not match the system");
  if ((Q_space.transpose() * Q_space - Mat<Scalar>::Identity(sys.d, sys.d)).cwiseAbs().maxCoeff() >
      tol)
    throw std::invalid_argument("change_basis: spatial transform is not orthogonal");
  if ((Q_state.transpose() * Q_state - Mat<Scalar>::Identity(sys.N, sys.N)).cwiseAbs().maxCoeff() >
      tol)
    throw std::invalid_argument("change_basis: state transform is not orthogonal");

  CoefficientSystem<Scalar> out = CoefficientSystem<Scalar>::zero(sys.d, sys.N, sys.K);
  out.bound = sys.bound;
  for (int ip = 0; ip < sys.d; ++ip)
    for (int jp = 0; jp < sys.d; ++jp) {
      Mat<Scalar> blk = Mat<Scalar>::Zero(sys.N, sys.N);
      for (int i = 0; i < sys.d; ++i)
        for (int j = 0; j < sys.d; ++j)
          blk += Q_space(i, ip) * Q_space(j, jp) * sys.a(i, j);
      out.a(ip, jp) = Q_state.transpose() * blk * Q_state;
    }
  for (int ip = 0; ip < sys.d; ++ip)
    for (int k = 0; k < sys.K; ++k) {
      Mat<Scalar> blk = Mat<Scalar>::Zero(sys.N, sys.N);
      for (int i = 0; i < sys.d; ++i) blk += Q_space(i, ip) * sys.sigma(i, k);
      out.sigma(ip, k) = Q_state.transpose() * blk * Q_state;
    }
  for (int ip = 0; ip < sys.d; ++ip) {
    Mat<Scalar> blk = Mat<Scalar>::Zero(sys.N, sys.N);
    for (int i = 0; i < sys.d; ++i) blk += Q_space(i, ip) * sys.b[i];
    out.b[ip] = Q_state.transpose() * blk * Q_state;
  }
  out.c = Q_state.transpose() * sys.c * Q_state;
  for (int k = 0; k < sys.K; ++k) out.nu[k] = Q_state.transpose() * sys.nu[k] * Q_state;
  return out;
}

// Built-in two component model systems on the line (d=1, N=2, K=1).
//
//   gradient_rotation(mu)           a = I,                    sigma = [[0,-mu],[mu,0]]
//   gradient_similarity(lam, mu)    a = I,                    sigma = [[lam,-mu],[mu,lam]]
//   anisotropic_cross(lam, mu)      a = diag(1+lam^2,1+mu^2), sigma = [[0,-mu],[lam,0]]
enum class BuiltinSystem { gradient_rotation, gradient_similarity, anisotropic_cross };

inline std::optional<BuiltinSystem> builtin_by_name(const std::string& name) {
  if (name == "gradient_rotation") return BuiltinSystem::gradient_rotation;
  if (name == "gradient_similarity") return BuiltinSystem::gradient_similarity;
  if (name == "anisotropic_cross") return BuiltinSystem::anisotropic_cross;
  return std::nullopt;
}

inline const char* builtin_name(BuiltinSystem which) {
  switch (which) {
    case BuiltinSystem::gradient_rotation: return "gradient_rotation";
    case BuiltinSystem::gradient_similarity: return "gradient_similarity";
    case BuiltinSystem::anisotropic_cross: return "anisotropic_cross";
  }
  return "";
}

template <class Scalar>
CoefficientSystem<Scalar> builtin(BuiltinSystem which, const std::vector<Scalar>& params) {
  auto need = [&](std::size_t n) {
    if (params.size() != n)
      throw std::invalid_argument(std::string("builtin: ") + builtin_name(which) + " takes " +
                                  std::to_string(n) + " parameter(s), got " +
                                  std::to_string(params.size()));
  };
  CoefficientSystem<Scalar> s = CoefficientSystem<Scalar>::zero(1, 2, 1);
  s.a(0, 0) = Mat<Scalar>::Identity(2, 2);
  switch (which) {
    case BuiltinSystem::gradient_rotation: {
      need(1);
      const Scalar mu = params[0];
      s.sigma(0, 0) << Scalar(0), -mu, mu, Scalar(0);
      break;
    }
    case BuiltinSystem::gradient_similarity: {
      need(2);
      const Scalar lam = params[0], mu = params[1];
      s.sigma(0, 0) << lam, -mu, mu, lam;
      break;
    }
    case BuiltinSystem::anisotropic_cross: {
      need(2);
      const Scalar lam = params[0], mu = params[1];
      s.a(0, 0) << Scalar(1) + lam * lam, Scalar(0), Scalar(0), Scalar(1) + mu * mu;
      s.sigma(0, 0) << Scalar(0), -mu, lam, Scalar(0);
      break;
    }
  }
  return s;
}

template <class Scalar>
CoefficientSystem<Scalar> builtin(const std::string& name, const std::vector<Scalar>& params) {
  const auto which = builtin_by_name(name);
  if (!which) throw std::invalid_argument("builtin: unknown system name '" + name + "'");
  return builtin<Scalar>(*which, params);
}

// Which moment norm is being measured: exponent p, smoothness order delta,
// derivative order m.
struct NormSpec {
  double p = 2;
  double delta = 0.5;
  int m = 0;
};

inline ValidationResult validate(const NormSpec& spec) {
  ValidationResult res;
  if (!(spec.p >= 2) || !std::isfinite(spec.p))
    res.add(ViolationKind::bad_parameter, "p must be finite and >= 2");
  if (!(spec.delta > 0) || !(spec.delta < 1))
    res.add(ViolationKind::bad_parameter, "delta must lie in (0,1)");
  if (spec.m < 0) res.add(ViolationKind::bad_parameter, "m must be non-negative");
  return res;
}

}  // namespace spar
