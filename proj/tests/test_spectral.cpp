#include <doctest.h>

#include <cmath>
#include <complex>

#include "spar/closed_form.hpp"
#include "spar/estimators.hpp"
#include "spar/spectral.hpp"

using namespace spar;

namespace {

GridSpec small_grid(int M, double L, double dt, double T, Scheme scheme) {
  GridSpec g;
  g.d = 1;
  g.M = M;
  g.L = L;
  g.dt = dt;
  g.T = T;
  g.scheme = scheme;
  return g;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("mode indexing round trips and pairs conjugates") {
  for (int d : {1, 2}) {
    GridSpec g;
    g.d = d;
    g.M = d == 1 ? 8 : 4;
    const ModeIndexer idx = indexer_for(g);
    for (std::int64_t m = 0; m < idx.size(); ++m) {
      int n[3] = {0, 0, 0};
      idx.decompose(m, n);
      CHECK(idx.flat(n) == m);
      CHECK(idx.conjugate(idx.conjugate(m)) == m);
    }
  }
  GridSpec g = small_grid(8, 4.0, 0.1, 1.0, Scheme::euler_maruyama);
  const ModeIndexer idx = indexer_for(g);
  int n = 3;
  const auto xi = idx.xi(idx.flat(&n), g.L);
  CHECK(xi(0) == doctest::Approx(2 * std::acos(-1.0) * 3 / 4.0).epsilon(1e-15));
  n = -4;
  CHECK(idx.has_nyquist(idx.flat(&n)));
  CHECK(idx.conjugate(idx.flat(&n)) == idx.flat(&n));
  n = 2;
  CHECK_FALSE(idx.has_nyquist(idx.flat(&n)));
}

TEST_CASE("frequency symbol of the rotation model") {
  const auto sys = builtin<double>("gradient_rotation", {0.5});
  Eigen::VectorXd xi(1);
  xi(0) = 2.0;
  CMat<double> drift;
  std::vector<CMat<double>> noises;
  symbol(sys, xi, drift, noises);
  CHECK(std::abs(drift(0, 0) - std::complex<double>(-4.0, 0.0)) < 1e-15);
  CHECK(std::abs(drift(1, 1) - std::complex<double>(-4.0, 0.0)) < 1e-15);
  CHECK(std::abs(drift(0, 1)) < 1e-15);
  CHECK(std::abs(noises[0](0, 1) - std::complex<double>(0.0, -1.0)) < 1e-15);
  CHECK(std::abs(noises[0](1, 0) - std::complex<double>(0.0, 1.0)) < 1e-15);
  CHECK(std::abs(noises[0](0, 0)) < 1e-15);
}

TEST_CASE("noiseless exponential stepping is exact") {
  const auto sys = builtin<double>("gradient_similarity", {0.0, 0.0});
  const GridSpec g = small_grid(8, k_two_pi, 0.1, 0.5, Scheme::exponential_drift);
  const SpectralState init = init_single_mode(g, 1);
  const auto ens = simulate(sys, Forcing{}, init, g, 1, RngSpec{3});
  const auto& final_state = ens.paths[0].states.back();
  const ModeIndexer idx = indexer_for(g);
  int n = 1;
  const std::int64_t m = idx.flat(&n);
  const double decayed = std::exp(-1.0) * std::exp(-0.5);
  CHECK(std::abs(final_state(m, 0) - std::complex<double>(decayed / 2, 0)) < 1e-12);
  CHECK(std::abs(final_state(m, 1) - std::complex<double>(0, -decayed / 2)) < 1e-12);
  n = -1;
  const std::int64_t mc = idx.flat(&n);
  CHECK(std::abs(final_state(mc, 0) - std::conj(final_state(m, 0))) < 1e-15);
}

TEST_CASE("constant forcing integrates exactly under both schemes") {
  const auto sys = builtin<double>("gradient_similarity", {0.0, 0.0});
  GridSpec g = small_grid(8, k_two_pi, 0.25, 0.25, Scheme::exponential_drift);
  const ModeIndexer idx = indexer_for(g);
  Forcing forcing;
  forcing.f_hat = CMat<double>::Zero(idx.size(), 2);
  int n = 1;
  const std::int64_t m = idx.flat(&n);
  forcing.f_hat(m, 0) = std::complex<double>(0.7, -0.2);

  SpectralState zero;
  zero.coeffs = CMat<double>::Zero(idx.size(), 2);
  auto ens = simulate(sys, forcing, zero, g, 1, RngSpec{5});
  // drift eigenvalue is -1 at |n| = 1, so Phi = 1 - e^{-dt}
  const std::complex<double> expect = (1.0 - std::exp(-0.25)) * forcing.f_hat(m, 0);
  CHECK(std::abs(ens.paths[0].states.back()(m, 0) - expect) < 1e-14);

  g.scheme = Scheme::euler_maruyama;
  ens = simulate(sys, forcing, zero, g, 1, RngSpec{5});
  CHECK(std::abs(ens.paths[0].states.back()(m, 0) - 0.25 * forcing.f_hat(m, 0)) < 1e-14);
}

TEST_CASE("noisy runs keep the real-field coefficient symmetry") {
  const auto sys = builtin<double>("gradient_rotation", {0.5});
  const GridSpec g = small_grid(32, 20.0, 0.01, 0.2, Scheme::exponential_drift);
  const auto ens = simulate(sys, Forcing{}, init_gaussian_line(g), g, 2, RngSpec{17});
  const ModeIndexer idx = indexer_for(g);
  for (const auto& path : ens.paths) {
    const auto& u = path.states.back();
    for (std::int64_t m = 0; m < idx.size(); ++m)
      for (int c = 0; c < 2; ++c)
        CHECK(std::abs(u(m, c) - std::conj(u(idx.conjugate(m), c))) < 1e-12);
  }
}

TEST_CASE("simulation is deterministic and thread-count independent") {
  const auto sys = builtin<double>("gradient_rotation", {0.7});
  const GridSpec g = small_grid(16, 10.0, 0.05, 0.25, Scheme::euler_maruyama);
  SimulateOptions serial;
  SimulateOptions parallel;
  parallel.threads = 4;
  const auto a = simulate(sys, Forcing{}, init_gaussian_line(g), g, 8, RngSpec{99}, serial);
  const auto b = simulate(sys, Forcing{}, init_gaussian_line(g), g, 8, RngSpec{99}, parallel);
  REQUIRE(a.paths.size() == b.paths.size());
  for (std::size_t pi = 0; pi < a.paths.size(); ++pi) {
    REQUIRE(a.paths[pi].states.size() == b.paths[pi].states.size());
    for (std::size_t s = 0; s < a.paths[pi].states.size(); ++s)
      CHECK((a.paths[pi].states[s] - b.paths[pi].states[s]).cwiseAbs().maxCoeff() == 0.0);
  }
  const auto c = simulate(sys, Forcing{}, init_gaussian_line(g), g, 8, RngSpec{100}, serial);
  CHECK((a.paths[0].states.back() - c.paths[0].states.back()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("zero noise amplitude collapses all paths onto one trajectory") {
  const auto sys = builtin<double>("gradient_rotation", {0.0});
  const GridSpec g = small_grid(16, 10.0, 0.05, 0.25, Scheme::exponential_drift);
  const auto ens = simulate(sys, Forcing{}, init_gaussian_line(g), g, 3, RngSpec{1});
  for (std::size_t pi = 1; pi < ens.paths.size(); ++pi)
    CHECK((ens.paths[pi].states.back() - ens.paths[0].states.back()).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("spectral norm equals the equispaced Riemann sum") {
  const GridSpec g = small_grid(32, 7.0, 0.1, 0.1, Scheme::euler_maruyama);
  const SpectralState init = init_gaussian_line(g);
  const double direct = l2_norm_sq(init.coeffs, g);
  double riemann = 0;
  for (int j = 0; j < g.M; ++j) {
    Eigen::VectorXd x(1);
    x(0) = g.L * j / g.M;
    riemann += evaluate_field(init.coeffs, g, x).squaredNorm();
  }
  riemann *= g.L / g.M;
  CHECK(direct == doctest::Approx(riemann).epsilon(1e-10));
}

TEST_CASE("component packing round trips") {
  const GridSpec g = small_grid(8, k_two_pi, 0.1, 0.1, Scheme::euler_maruyama);
  const ModeIndexer idx = indexer_for(g);
  CVec<double> v(idx.size());
  for (std::int64_t m = 0; m < idx.size(); ++m)
    v(m) = std::complex<double>(std::sin(0.3 * m + 0.1), std::cos(0.7 * m));
  const auto u = v_to_u(v, idx);
  const auto back = u_to_v(u);
  CHECK((back - v).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("spectral derivatives of a pure cosine") {
  const GridSpec g = small_grid(16, k_two_pi, 0.1, 0.1, Scheme::euler_maruyama);
  const ModeIndexer idx = indexer_for(g);
  CMat<double> coeffs = CMat<double>::Zero(idx.size(), 2);
  int n = 1;
  coeffs(idx.flat(&n), 0) = 0.5;
  n = -1;
  coeffs(idx.flat(&n), 0) = 0.5;  // u1(x) = cos x
  const auto d1 = spectral_derivative(coeffs, g, 1);
  const auto d2 = spectral_derivative(coeffs, g, 2);
  for (double x : {0.0, 0.4, 1.9, 3.7}) {
    Eigen::VectorXd xv(1);
    xv(0) = x;
    CHECK(evaluate_field(d1, g, xv)(0) == doctest::Approx(-std::sin(x)).epsilon(1e-12));
    CHECK(evaluate_field(d2, g, xv)(0) == doctest::Approx(-std::cos(x)).epsilon(1e-12));
  }
}

TEST_CASE("stiff explicit steps raise the stability flag") {
  const auto sys = builtin<double>("gradient_rotation", {0.5});
  GridSpec g = small_grid(64, k_two_pi, 1.0, 2.0, Scheme::euler_maruyama);
  const auto flagged = simulate(sys, Forcing{}, init_single_mode(g, 1), g, 1, RngSpec{2});
  CHECK(flagged.stability_flag);
  g.dt = 1e-4;
  g.T = 1e-3;
  const auto calm = simulate(sys, Forcing{}, init_single_mode(g, 1), g, 1, RngSpec{2});
  CHECK_FALSE(calm.stability_flag);
}

TEST_CASE("runaway explicit integration aborts once most paths overflow") {
  const auto sys = builtin<double>("gradient_rotation", {0.5});
  const GridSpec g = small_grid(16, k_two_pi, 0.5, 200.0, Scheme::euler_maruyama);
  CHECK_THROWS_AS(simulate(sys, Forcing{}, init_single_mode(g, 7), g, 2, RngSpec{4}),
                  std::runtime_error);
}

TEST_CASE("recording stride and increment bookkeeping") {
  const auto sys = builtin<double>("gradient_rotation", {0.5});
  const GridSpec g = small_grid(8, 5.0, 0.1, 1.0, Scheme::euler_maruyama);
  SimulateOptions opts;
  opts.record_stride = 1;
  opts.keep_increments = true;
  const auto ens = simulate(sys, Forcing{}, init_gaussian_line(g), g, 2, RngSpec{31}, opts);
  const auto& p = ens.paths[0];
  REQUIRE(p.states.size() == 11);
  REQUIRE(p.times.size() == 11);
  CHECK(p.times[3] == doctest::Approx(0.3).epsilon(1e-12));
  REQUIRE(p.has_increments);
  REQUIRE(p.increments.rows() == 10);
  CHECK(p.w_sum(0) == doctest::Approx(p.increments.col(0).sum()).epsilon(1e-12));
  CHECK(p.increments(4, 0) ==
        doctest::Approx(std::sqrt(0.1) * normal_at(31, 0, 4, 0)).epsilon(1e-15));

  SimulateOptions sparse;  // default records ends only
  const auto ends = simulate(sys, Forcing{}, init_gaussian_line(g), g, 1, RngSpec{31}, sparse);
  CHECK(ends.paths[0].states.size() == 2);
  CHECK(ends.paths[0].times.back() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact similarity sampler matches the mode-sum norms") {
  const std::vector<double> t_grid{0.5, 1.0};
  const auto ens = simulate_similarity_exact(0.5, 0.5, t_grid, 8, 3, RngSpec{5});
  const auto norms = similarity_norm_sq_samples(0.5, 0.5, t_grid, 3, 5);
  REQUIRE(ens.paths.size() == 3);
  for (int pi = 0; pi < 3; ++pi) {
    const auto& path = ens.paths[pi];
    REQUIRE(path.states.size() == 3);  // t = 0 plus both grid times
    CHECK(path.times[0] == 0.0);
    for (std::size_t s = 0; s < t_grid.size(); ++s)
      CHECK(l2_norm_sq(path.states[s + 1], ens.grid) ==
            doctest::Approx(norms(pi, static_cast<std::int64_t>(s))).epsilon(1e-9));
  }
}

TEST_CASE("discretized rotation model reproduces the whole-line moment") {
  const double mu = 0.5, t = 1.0, p = 4.0;
  const auto sys = builtin<double>("gradient_rotation", {mu});
  const GridSpec g = small_grid(256, 40.0, 0.005, t, Scheme::exponential_drift);
  SimulateOptions opts;
  opts.threads = 2;
  const auto ens = simulate(sys, Forcing{}, init_gaussian_line(g), g, 400, RngSpec{88}, opts);
  Eigen::VectorXd x(1);
  x(0) = 0.0;
  const auto rep = pointwise_moment(ens, x, t, p);
  const auto mv = line_moment(0.0, t, mu, p);
  REQUIRE(mv.finite);
  CHECK(std::abs(rep.estimate - mv.value) < 3 * rep.stderr_);
}

}  // TEST_SUITE
