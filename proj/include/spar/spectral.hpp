#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "spar/closed_form.hpp"
#include "spar/rng.hpp"
#include "spar/system.hpp"

namespace spar {

enum class Scheme { euler_maruyama, exponential_drift };

inline const char* scheme_name(Scheme s) {
  return s == Scheme::euler_maruyama ? "euler_maruyama" : "exponential_drift";
}

// Fourier grid of M modes per axis on the torus [0,L)^d; per-axis integers
// run over [-M/2, M/2-1].
struct GridSpec {
  int d = 1;
  int M = 2;
  double L = k_two_pi;
  double dt = 1e-2;
  double T = 1;
  Scheme scheme = Scheme::exponential_drift;
};

inline void validate_grid(const GridSpec& g) {
  if (g.d < 1 || g.d > 3) throw std::invalid_argument("grid: d must be 1, 2 or 3");
  if (g.M < 2 || g.M % 2 != 0) throw std::invalid_argument("grid: M must be even and >= 2");
  if (!(g.L > 0)) throw std::invalid_argument("grid: L must be positive");
  if (!(g.dt > 0)) throw std::invalid_argument("grid: dt must be positive");
  if (!(g.T >= g.dt)) throw std::invalid_argument("grid: T must be >= dt");
}

// Flat ordering of the mode lattice, first axis fastest.
struct ModeIndexer {
  int d = 1;
  int M = 2;

  std::int64_t size() const {
    std::int64_t s = 1;
    for (int i = 0; i < d; ++i) s *= M;
    return s;
  }
  void decompose(std::int64_t flat, int* n) const {
    for (int i = 0; i < d; ++i) {
      n[i] = static_cast<int>(flat % M) - M / 2;
      flat /= M;
    }
  }
  std::int64_t flat(const int* n) const {
    std::int64_t f = 0;
    for (int i = d - 1; i >= 0; --i) f = f * M + (n[i] + M / 2);
    return f;
  }
  // Physical frequency 2 pi n / L per axis.
  Eigen::VectorXd xi(std::int64_t flat, double L) const {
    int n[3] = {0, 0, 0};
    decompose(flat, n);
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = k_two_pi * n[i] / L;
    return v;
  }
  // Index of the negated lattice point; the -M/2 edge maps to itself.
  std::int64_t conjugate(std::int64_t flat) const {
    int n[3], m[3];
    decompose(flat, n);
    for (int i = 0; i < d; ++i) m[i] = (n[i] == -M / 2) ? -M / 2 : -n[i];
    return this->flat(m);
  }
  bool has_nyquist(std::int64_t flat) const {
    int n[3];
    decompose(flat, n);
    for (int i = 0; i < d; ++i)
      if (n[i] == -M / 2) return true;
    return false;
  }
};

inline ModeIndexer indexer_for(const GridSpec& g) { return ModeIndexer{g.d, g.M}; }

// Fourier coefficients of the field at one instant: row per mode (flat
// order), column per component.  Real fields obey coeffs(conjugate(m), :) =
// conj(coeffs(m, :)).
struct SpectralState {
  double t = 0;
  CMat<double> coeffs;
};

// Constant-in-time forcing; empty matrices mean zero.
struct Forcing {
  CMat<double> f_hat;                // modes x N
  std::vector<CMat<double>> g_hat;   // per k, modes x N

  bool has_f() const { return f_hat.size() > 0; }
  bool has_g() const { return !g_hat.empty(); }
};

// Frequency-domain generator of one mode:
//   drift(xi) = -a^{ij} xi_i xi_j + i b^i xi_i + c
//   noise_k(xi) = i sigma^{ik} xi_i + nu^k
inline void symbol(const CoefficientSystem<double>& sys, const Eigen::VectorXd& xi,
                   CMat<double>& drift, std::vector<CMat<double>>& noise) {
  const int N = sys.N;
  const std::complex<double> iu(0, 1);
  drift = CMat<double>::Zero(N, N);
  for (int i = 0; i < sys.d; ++i) {
    for (int j = 0; j < sys.d; ++j) drift -= (xi(i) * xi(j)) * sys.a(i, j).cast<std::complex<double>>();
    drift += iu * xi(i) * sys.b[i].cast<std::complex<double>>();
  }
  drift += sys.c.cast<std::complex<double>>();
  noise.assign(sys.K, CMat<double>::Zero(N, N));
  for (int k = 0; k < sys.K; ++k) {
    for (int i = 0; i < sys.d; ++i)
      noise[k] += iu * xi(i) * sys.sigma(i, k).cast<std::complex<double>>();
    noise[k] += sys.nu[k].cast<std::complex<double>>();
  }
}

// Per-mode operators shared by every path of a run.
struct ModeOperators {
  int N = 0;
  int K = 0;
  double dt = 0;
  Scheme scheme = Scheme::exponential_drift;
  std::vector<CMat<double>> drift;              // per mode
  std::vector<std::vector<CMat<double>>> noise; // per mode, per k
  std::vector<CMat<double>> exp_drift;          // per mode, exp(drift dt)
  std::vector<CMat<double>> int_exp;            // per mode, integral of exp(drift s) ds
  double max_drift_radius = 0;
};

inline ModeOperators precompute(const CoefficientSystem<double>& sys, const GridSpec& grid) {
  validate_grid(grid);
  const ModeIndexer idx = indexer_for(grid);
  const std::int64_t n_modes = idx.size();
  ModeOperators ops;
  ops.N = sys.N;
  ops.K = sys.K;
  ops.dt = grid.dt;
  ops.scheme = grid.scheme;
  ops.drift.resize(n_modes);
  ops.noise.resize(n_modes);
  if (grid.scheme == Scheme::exponential_drift) {
    ops.exp_drift.resize(n_modes);
    ops.int_exp.resize(n_modes);
  }
  for (std::int64_t m = 0; m < n_modes; ++m) {
    symbol(sys, idx.xi(m, grid.L), ops.drift[m], ops.noise[m]);
    Eigen::ComplexEigenSolver<CMat<double>> es(ops.drift[m], false);
    ops.max_drift_radius = std::max(ops.max_drift_radius, es.eigenvalues().cwiseAbs().maxCoeff());
    if (grid.scheme == Scheme::exponential_drift) {
      // exp of the augmented block [[D, I], [0, 0]] dt carries both the
      // propagator and its forcing integral in one call.
      const int N = sys.N;
      CMat<double> aug = CMat<double>::Zero(2 * N, 2 * N);
      aug.topLeftCorner(N, N) = ops.drift[m] * grid.dt;
      aug.topRightCorner(N, N) = CMat<double>::Identity(N, N) * grid.dt;
      const CMat<double> e = aug.exp();
      ops.exp_drift[m] = e.topLeftCorner(N, N);
      ops.int_exp[m] = e.topRightCorner(N, N);
    }
  }
  return ops;
}

// One time step of every mode in place.  dW holds K increments.
inline void step(SpectralState& state, const ModeOperators& ops, const Forcing& forcing,
                 const double* dW) {
  const std::int64_t n_modes = state.coeffs.rows();
  const int N = ops.N;
  CVec<double> u(N), du(N);
  for (std::int64_t m = 0; m < n_modes; ++m) {
    u = state.coeffs.row(m).transpose();
    if (ops.scheme == Scheme::euler_maruyama) {
      du = ops.drift[m] * u * ops.dt;
      if (forcing.has_f()) du += forcing.f_hat.row(m).transpose() * ops.dt;
      for (int k = 0; k < ops.K; ++k) {
        CVec<double> g = ops.noise[m][k] * u;
        if (forcing.has_g()) g += forcing.g_hat[k].row(m).transpose();
        du += g * dW[k];
      }
      state.coeffs.row(m) = (u + du).transpose();
    } else {
      CVec<double> v = u;
      for (int k = 0; k < ops.K; ++k) {
        CVec<double> g = ops.noise[m][k] * u;
        if (forcing.has_g()) g += forcing.g_hat[k].row(m).transpose();
        v += g * dW[k];
      }
      v = ops.exp_drift[m] * v;
      if (forcing.has_f()) v += ops.int_exp[m] * forcing.f_hat.row(m).transpose();
      state.coeffs.row(m) = v.transpose();
    }
  }
  state.t += ops.dt;
}

// Convenience wrapper building the operators on the fly.
inline SpectralState step(const SpectralState& state, const CoefficientSystem<double>& sys,
                          const Forcing& forcing, const std::vector<double>& dW,
                          const GridSpec& grid) {
  GridSpec g = grid;
  g.T = std::max(g.T, g.dt);
  const ModeOperators ops = precompute(sys, g);
  SpectralState out = state;
  step(out, ops, forcing, dW.data());
  return out;
}

// One trajectory: states at the recorded instants, the Wiener increments
// when kept, and the accumulated Wiener values at the horizon.
struct Path {
  std::vector<double> times;
  std::vector<CMat<double>> states;
  Eigen::MatrixXd increments;  // n_steps x K when kept
  Eigen::VectorXd w_sum;       // per k, sum of increments up to the horizon
  bool has_increments = false;
  bool diverged = false;
  std::int64_t diverged_step = -1;
};

struct RngSpec {
  std::uint64_t master_seed = 0;
};

struct PathEnsemble {
  GridSpec grid;
  std::uint64_t seed = 0;
  std::vector<Path> paths;
  bool stability_flag = false;
};

struct SimulateOptions {
  // 0 records only the initial and final states; r > 0 records every r-th
  // step as well.
  std::int64_t record_stride = 0;
  bool keep_increments = false;
  int threads = 1;
};

inline PathEnsemble simulate(const CoefficientSystem<double>& sys, const Forcing& forcing,
                             const SpectralState& init, const GridSpec& grid,
                             std::int64_t n_paths, const RngSpec& rng,
                             const SimulateOptions& opts = {}) {
  const auto valid = validate(sys);
  if (!valid.ok)
    throw std::invalid_argument("simulate: invalid system: " + valid.violations.front().detail);
  validate_grid(grid);
  if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be positive");
  const ModeIndexer idx = indexer_for(grid);
  const std::int64_t n_modes = idx.size();
  if (init.coeffs.rows() != n_modes || init.coeffs.cols() != sys.N)
    throw std::invalid_argument("simulate: initial state shape does not match grid and system");
  if (forcing.has_f() && (forcing.f_hat.rows() != n_modes || forcing.f_hat.cols() != sys.N))
    throw std::invalid_argument("simulate: forcing f shape mismatch");
  if (forcing.has_g()) {
    if (static_cast<int>(forcing.g_hat.size()) != sys.K)
      throw std::invalid_argument("simulate: one g block per noise component required");
    for (const auto& g : forcing.g_hat)
      if (g.rows() != n_modes || g.cols() != sys.N)
        throw std::invalid_argument("simulate: forcing g shape mismatch");
  }

  const ModeOperators ops = precompute(sys, grid);
  const std::int64_t n_steps = std::llround(grid.T / grid.dt);
  PathEnsemble ens;
  ens.grid = grid;
  ens.seed = rng.master_seed;
  ens.stability_flag = grid.dt * ops.max_drift_radius > 1;
  ens.paths.resize(n_paths);

  auto run_path = [&](std::int64_t pi) {
    Path& path = ens.paths[pi];
    SpectralState state = init;
    state.t = 0;
    path.times.push_back(0);
    path.states.push_back(state.coeffs);
    path.w_sum = Eigen::VectorXd::Zero(sys.K);
    if (opts.keep_increments) {
      path.increments.resize(n_steps, sys.K);
      path.has_increments = true;
    }
    std::vector<double> dW(sys.K);
    const double sqrt_dt = std::sqrt(grid.dt);
    for (std::int64_t s = 0; s < n_steps; ++s) {
      for (int k = 0; k < sys.K; ++k) {
        dW[k] = sqrt_dt * normal_at(rng.master_seed, static_cast<std::uint64_t>(pi),
                                    static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(k));
        path.w_sum(k) += dW[k];
        if (opts.keep_increments) path.increments(s, k) = dW[k];
      }
      step(state, ops, forcing, dW.data());
      if (!state.coeffs.allFinite()) {
        path.diverged = true;
        path.diverged_step = s;
        break;
      }
      const bool last = s + 1 == n_steps;
      if (last || (opts.record_stride > 0 && (s + 1) % opts.record_stride == 0)) {
        path.times.push_back(state.t);
        path.states.push_back(state.coeffs);
      }
    }
    return;
  };

  const int n_threads = std::max(1, opts.threads);
  if (n_threads == 1) {
    for (std::int64_t pi = 0; pi < n_paths; ++pi) run_path(pi);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w)
      pool.emplace_back([&, w]() {
        for (std::int64_t pi = w; pi < n_paths; pi += n_threads) run_path(pi);
      });
    for (auto& th : pool) th.join();
  }

  std::int64_t diverged = 0;
  for (const auto& p : ens.paths) diverged += p.diverged ? 1 : 0;
  if (2 * diverged > n_paths)
    throw std::runtime_error("simulate: more than half of the paths overflowed");
  return ens;
}

// Real-space field value u(x) = Re sum_m coeffs(m,:) e^{i <xi_m, x>}.
inline Eigen::VectorXd evaluate_field(const CMat<double>& coeffs, const GridSpec& grid,
                                      const Eigen::VectorXd& x) {
  const ModeIndexer idx = indexer_for(grid);
  const std::int64_t n_modes = idx.size();
  const int N = static_cast<int>(coeffs.cols());
  CVec<double> acc = CVec<double>::Zero(N);
  for (std::int64_t m = 0; m < n_modes; ++m) {
    const Eigen::VectorXd xi = idx.xi(m, grid.L);
    const std::complex<double> ph = std::polar(1.0, xi.dot(x));
    acc += ph * coeffs.row(m).transpose();
  }
  return acc.real();
}

// Coefficients of the m-th spatial derivative along one axis:
// multiplication by (i xi_axis)^m.
inline CMat<double> spectral_derivative(const CMat<double>& coeffs, const GridSpec& grid, int m,
                                        int axis = 0) {
  if (m < 0) throw std::invalid_argument("spectral_derivative: order must be non-negative");
  if (axis < 0 || axis >= grid.d) throw std::invalid_argument("spectral_derivative: bad axis");
  const ModeIndexer idx = indexer_for(grid);
  CMat<double> out = coeffs;
  for (std::int64_t mm = 0; mm < out.rows(); ++mm) {
    const std::complex<double> f(0, idx.xi(mm, grid.L)(axis));
    out.row(mm) *= std::pow(f, m);
  }
  return out;
}

// Spatial L2 norm squared by Parseval: L^d sum |coeffs|^2.
inline double l2_norm_sq(const CMat<double>& coeffs, const GridSpec& grid) {
  double scale = 1;
  for (int i = 0; i < grid.d; ++i) scale *= grid.L;
  return scale * coeffs.squaredNorm();
}

// L2 inner product of two coefficient sets, real part.
inline double l2_inner(const CMat<double>& a, const CMat<double>& b, const GridSpec& grid) {
  double scale = 1;
  for (int i = 0; i < grid.d; ++i) scale *= grid.L;
  return scale * a.cwiseProduct(b.conjugate()).sum().real();
}

// Complexified two-component field: v = u1 + i u2 modewise.
inline CVec<double> u_to_v(const CMat<double>& coeffs) {
  if (coeffs.cols() != 2) throw std::invalid_argument("u_to_v: two components required");
  return coeffs.col(0) + std::complex<double>(0, 1) * coeffs.col(1);
}

// Inverse map: u1_n = (v_n + conj(v_{-n}))/2, u2_n = -i (v_n - conj(v_{-n}))/2.
inline CMat<double> v_to_u(const CVec<double>& v, const ModeIndexer& idx) {
  CMat<double> out(v.size(), 2);
  for (std::int64_t m = 0; m < v.size(); ++m) {
    const std::complex<double> a = v(m);
    const std::complex<double> b = std::conj(v(idx.conjugate(m)));
    out(m, 0) = (a + b) / 2.0;
    out(m, 1) = std::complex<double>(0, -0.5) * (a - b);
  }
  return out;
}

// Initial states for the two-component models on a one-dimensional grid.
// All of them leave the unpaired -M/2 row zero so the real-field symmetry
// is exact.

// Periodized Gaussian e^{-x^2/2} in the first component.
inline SpectralState init_gaussian_line(const GridSpec& grid) {
  if (grid.d != 1) throw std::invalid_argument("init_gaussian_line: one-dimensional grids only");
  const ModeIndexer idx = indexer_for(grid);
  SpectralState st;
  st.coeffs = CMat<double>::Zero(idx.size(), 2);
  const double amp = std::sqrt(k_two_pi) / grid.L;
  for (std::int64_t m = 0; m < idx.size(); ++m) {
    if (idx.has_nyquist(m)) continue;
    const double xi = idx.xi(m, grid.L)(0);
    st.coeffs(m, 0) = amp * std::exp(-xi * xi / 2);
  }
  return st;
}

// Mode-Gaussian complex data v_n = e^{-n^2} on the 2 pi torus.
inline SpectralState init_mode_gaussian(const GridSpec& grid) {
  if (grid.d != 1) throw std::invalid_argument("init_mode_gaussian: one-dimensional grids only");
  const ModeIndexer idx = indexer_for(grid);
  CVec<double> v = CVec<double>::Zero(idx.size());
  for (std::int64_t m = 0; m < idx.size(); ++m) {
    if (idx.has_nyquist(m)) continue;
    int n;
    idx.decompose(m, &n);
    v(m) = std::exp(-static_cast<double>(n) * n);
  }
  SpectralState st;
  st.coeffs = v_to_u(v, idx);
  return st;
}

// Single complex mode v_{n0} = e^{-n0^2}.
inline SpectralState init_single_mode(const GridSpec& grid, int n0) {
  if (grid.d != 1) throw std::invalid_argument("init_single_mode: one-dimensional grids only");
  const ModeIndexer idx = indexer_for(grid);
  if (n0 < -grid.M / 2 + 1 || n0 > grid.M / 2 - 1)
    throw std::invalid_argument("init_single_mode: mode outside the grid");
  CVec<double> v = CVec<double>::Zero(idx.size());
  const std::int64_t m = idx.flat(&n0);
  v(m) = std::exp(-static_cast<double>(n0) * n0);
  SpectralState st;
  st.coeffs = v_to_u(v, idx);
  return st;
}

// Exact sampler of the rotation-similarity torus model: Brownian values on
// the given time grid, modes filled from the closed-form mode solution; no
// time-discretization error.  Grid M = 2 n_max + 2 with the unpaired row
// kept zero.
inline PathEnsemble simulate_similarity_exact(double lam, double mu,
                                              const std::vector<double>& t_grid,
                                              std::int64_t n_max, std::int64_t n_paths,
                                              const RngSpec& rng) {
  if (n_max < 1) throw std::invalid_argument("simulate_similarity_exact: n_max must be >= 1");
  if (n_paths < 1) throw std::invalid_argument("simulate_similarity_exact: n_paths must be >= 1");
  for (std::size_t s = 0; s < t_grid.size(); ++s) {
    if (!(t_grid[s] > (s == 0 ? 0.0 : t_grid[s - 1])))
      throw std::invalid_argument("simulate_similarity_exact: times must increase from above 0");
  }
  GridSpec grid;
  grid.d = 1;
  grid.M = static_cast<int>(2 * n_max + 2);
  grid.L = k_two_pi;
  grid.dt = t_grid.empty() ? 1 : t_grid.back();
  grid.T = t_grid.empty() ? 1 : t_grid.back();
  const ModeIndexer idx = indexer_for(grid);
  PathEnsemble ens;
  ens.grid = grid;
  ens.seed = rng.master_seed;
  ens.paths.resize(n_paths);
  for (std::int64_t pi = 0; pi < n_paths; ++pi) {
    Path& path = ens.paths[pi];
    path.w_sum = Eigen::VectorXd::Zero(1);
    double w = 0, t_prev = 0;
    CVec<double> v = CVec<double>::Zero(idx.size());
    auto fill = [&](double t, double wt) {
      for (std::int64_t m = 0; m < idx.size(); ++m) {
        if (idx.has_nyquist(m)) continue;
        int n;
        idx.decompose(m, &n);
        v(m) = torus_mode(n, t, lam, mu, wt);
      }
      path.times.push_back(t);
      path.states.push_back(v_to_u(v, idx));
    };
    fill(0, 0);
    for (std::size_t s = 0; s < t_grid.size(); ++s) {
      const double dt = t_grid[s] - t_prev;
      w += std::sqrt(dt) * normal_at(rng.master_seed, static_cast<std::uint64_t>(pi),
                                     static_cast<std::uint64_t>(s), 0);
      t_prev = t_grid[s];
      fill(t_grid[s], w);
    }
    path.w_sum(0) = w;
  }
  return ens;
}

// Squared-norm samples of the same model without storing states: one row
// per path, one column per time.  Path pi reproduces the Brownian path that
// simulate_similarity_exact would draw.
inline Eigen::MatrixXd similarity_norm_sq_samples(double lam, double mu,
                                                  const std::vector<double>& t_grid,
                                                  std::int64_t n_paths, std::uint64_t seed) {
  for (std::size_t s = 0; s < t_grid.size(); ++s) {
    if (!(t_grid[s] > (s == 0 ? 0.0 : t_grid[s - 1])))
      throw std::invalid_argument("similarity_norm_sq_samples: times must increase from above 0");
  }
  Eigen::MatrixXd out(n_paths, static_cast<std::int64_t>(t_grid.size()));
  for (std::int64_t pi = 0; pi < n_paths; ++pi) {
    double w = 0, t_prev = 0;
    for (std::size_t s = 0; s < t_grid.size(); ++s) {
      const double dt = t_grid[s] - t_prev;
      w += std::sqrt(dt) * normal_at(seed, static_cast<std::uint64_t>(pi),
                                     static_cast<std::uint64_t>(s), 0);
      t_prev = t_grid[s];
      out(pi, static_cast<std::int64_t>(s)) = torus_l2_norm_sq(t_grid[s], lam, mu, w);
    }
  }
  return out;
}

}  // namespace spar
