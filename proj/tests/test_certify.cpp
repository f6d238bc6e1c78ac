#include <doctest.h>

#include <cmath>

#include "spar/certify.hpp"
#include "spar/rng.hpp"

using namespace spar;

namespace {

BlockGrid<double> random_grid(int d, int N, std::uint64_t seed) {
  CounterRng rng(stream_key(seed));
  BlockGrid<double> grid(d, d, N);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c) grid(i, j)(r, c) = rng.normal();
  return grid;
}

CoefficientSystem<double> random_system(int d, int N, int K, std::uint64_t seed) {
  CounterRng rng(stream_key(seed));
  auto sys = CoefficientSystem<double>::zero(d, N, K);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c) sys.a(i, j)(r, c) = rng.normal();
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < K; ++k)
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c) sys.sigma(i, k)(r, c) = rng.normal();
  return sys;
}

LambdaTensor<double> random_symmetric_lambda(int d, int K, int N, std::uint64_t seed) {
  CounterRng rng(stream_key(seed));
  auto lam = LambdaTensor<double>::zero(d, K, N);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < K; ++k) {
      Mat<double> m(N, N);
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c) m(r, c) = rng.normal();
      lam.entries(i, k) = (m + m.transpose()) / 2.0;
    }
  return lam;
}

double brute_force_min_2x2(const BlockGrid<double>& grid) {
  const double pi = std::acos(-1.0);
  auto value_at = [&](double th, double ph) {
    Vec<double> xi(2), eta(2);
    xi << std::cos(th), std::sin(th);
    eta << std::cos(ph), std::sin(ph);
    return biquadratic_value(grid, xi, eta);
  };
  double best = std::numeric_limits<double>::infinity();
  double best_th = 0, best_ph = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = value_at(pi * i / n, pi * j / n);
      if (v < best) {
        best = v;
        best_th = pi * i / n;
        best_ph = pi * j / n;
      }
    }
  double w = pi / n;
  for (int round = 0; round < 3; ++round) {
    const int m = 100;
    double th0 = best_th, ph0 = best_ph;
    for (int i = -m; i <= m; ++i)
      for (int j = -m; j <= m; ++j) {
        const double v = value_at(th0 + w * i / m, ph0 + w * j / m);
        if (v < best) {
          best = v;
          best_th = th0 + w * i / m;
          best_ph = ph0 + w * j / m;
        }
      }
    w /= 50;
  }
  return best;
}

}  // namespace

TEST_SUITE("certify") {

TEST_CASE("corrected tensor with zero correction matches the first sufficient check") {
  for (std::uint64_t seed : {41u, 42u, 43u, 44u, 45u}) {
    const int d = 1 + static_cast<int>(seed % 3);
    const int N = 1 + static_cast<int>((seed / 3) % 3);
    const int K = 1 + static_cast<int>(seed % 2);
    const auto sys = random_system(d, N, K, seed);
    const double p = 2.0 + 0.5 * static_cast<double>(seed % 5);
    const auto direct = criterion_i_tensor(sys, p);
    const auto via = corrected_tensor(sys, p, LambdaTensor<double>::zero(d, K, N));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        CHECK((direct(i, j) - via(i, j)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("corrected tensor at the symmetric part matches the second sufficient check") {
  for (std::uint64_t seed : {51u, 52u, 53u}) {
    const auto sys = random_system(2, 2, 2, seed);
    const double p = 3.7;
    const auto direct = criterion_ii_tensor(sys, p);
    const auto via = corrected_tensor(sys, p, LambdaTensor<double>::sym_sigma(sys));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK((direct(i, j) - via(i, j)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("similarity margins with zero correction follow the closed form") {
  CounterRng rng(stream_key(77));
  for (int trial = 0; trial < 30; ++trial) {
    const double lam = 3.0 * rng.u01() - 1.5;
    const double mu = 3.0 * rng.u01() - 1.5;
    const double p = 2.0 + 4.0 * rng.u01();
    const auto sys = builtin<double>("gradient_similarity", {lam, mu});
    std::vector<Mat<double>> B{sys.sigma(0, 0)};
    std::vector<Mat<double>> Lambda{Mat<double>::Zero(2, 2)};
    const double margin = certify_1d(sys.a(0, 0), B, p, Lambda);
    CHECK(margin == doctest::Approx(2.0 - lam * lam - (p - 1.0) * mu * mu).epsilon(1e-12));
  }
}

TEST_CASE("cross-coupled example margins at p = 3") {
  const auto sys = builtin<double>("anisotropic_cross", {3.0, 1.0});
  std::vector<Mat<double>> B{sys.sigma(0, 0)};

  const double uncorrected = certify_1d(sys.a(0, 0), B, 3.0, {Mat<double>::Zero(2, 2)});
  CHECK(uncorrected == doctest::Approx(-1.0).epsilon(1e-12));

  Mat<double> opt(2, 2);
  opt << 0.0, 1.0, 1.0, 0.0;
  const double corrected = certify_1d(sys.a(0, 0), B, 3.0, {opt});
  CHECK(corrected == doctest::Approx(2.0).epsilon(1e-12));

  // zero correction tensor means the fully symmetrized condition block
  const auto zero_lam = certify(sys, 3.0, LambdaTensor<double>::zero(1, 1, 2));
  CHECK(zero_lam.margin == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(zero_lam.status == Status::certified);
  CHECK(zero_lam.method == Method::exact_d1);
}

TEST_CASE("refuted and certified statuses from the one-dimensional margin") {
  const auto cross = builtin<double>("anisotropic_cross", {3.0, 1.0});
  const auto bad = certify_1d_system(cross, 3.0, {Mat<double>::Zero(2, 2)});
  CHECK(bad.status == Status::refuted);
  CHECK(bad.margin == doctest::Approx(-1.0).epsilon(1e-12));

  const auto heat = builtin<double>("gradient_similarity", {0.0, 0.0});
  const auto good = certify(heat, 4.0, LambdaTensor<double>::zero(1, 1, 2));
  CHECK(good.status == Status::certified);
  CHECK(good.margin == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("at p = 2 the margin ignores the correction") {
  const auto sys = random_system(2, 2, 1, 91);
  const auto base = certify(sys, 2.0, LambdaTensor<double>::zero(2, 1, 2));
  for (std::uint64_t seed : {71u, 72u, 73u}) {
    const auto lam = random_symmetric_lambda(2, 1, 2, seed);
    const auto other = certify(sys, 2.0, lam);
    CHECK(other.margin == doctest::Approx(base.margin).epsilon(1e-9));
  }
}

TEST_CASE("margins do not increase with p") {
  const auto sys = builtin<double>("gradient_similarity", {0.4, 0.6});
  double prev = std::numeric_limits<double>::infinity();
  for (double p : {2.0, 2.5, 3.0, 4.0, 6.0}) {
    const auto cert = certify(sys, p, LambdaTensor<double>::sym_sigma(sys));
    CHECK(cert.margin <= prev + 1e-12);
    prev = cert.margin;
  }
}

TEST_CASE("rank-one minimum matches an exhaustive angular search") {
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    const auto grid = random_grid(2, 2, seed);
    const auto mn = rank_one_min(grid);
    const double brute = brute_force_min_2x2(grid);
    CHECK(mn.value == doctest::Approx(brute).epsilon(1e-6));
    // reported witnesses reproduce the value
    CHECK(biquadratic_value(grid, mn.xi, mn.eta) == doctest::Approx(mn.value).epsilon(1e-10));
    CHECK(mn.xi.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mn.eta.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("full coercivity never exceeds the rank-one relaxation") {
  for (std::uint64_t seed : {111u, 112u, 113u}) {
    const auto sys = random_system(2, 2, 2, seed);
    const auto cm = classical_margins(sys);
    CHECK(cm.full <= cm.rank_one + 1e-12);
  }
}

TEST_CASE("margins are invariant under orthogonal changes of variables") {
  const auto sys = random_system(2, 2, 1, 121);
  auto lam = random_symmetric_lambda(2, 1, 2, 122);
  const double p = 3.3;

  const double th = 0.7, ph = -1.1;
  Mat<double> qs(2, 2), qn(2, 2);
  qs << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  qn << std::cos(ph), -std::sin(ph), std::sin(ph), std::cos(ph);
  const auto rotated = change_basis(sys, qs, qn);
  const auto lam_rot = transport_lambda(lam, qs, qn);

  const auto before = certify(sys, p, lam);
  const auto after = certify(rotated, p, lam_rot);
  CHECK(after.margin == doctest::Approx(before.margin).epsilon(1e-9));
}

TEST_CASE("optimized correction recovers the cross-coupled closed form") {
  const auto sys = builtin<double>("anisotropic_cross", {3.0, 1.0});
  const auto cert = best_correction(sys, 3.0);
  CHECK(cert.status == Status::certified);
  CHECK(cert.margin == doctest::Approx(2.0).epsilon(1e-6));
  const auto condition = condition_from_lambda(sys, cert.lambda);
  CHECK(condition[0](0, 1) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("optimized correction is at least as good as the fixed choices") {
  for (std::uint64_t seed : {131u, 132u}) {
    const auto sys = random_system(1, 2, 1, seed);
    const double p = 3.0;
    const auto zero = certify(sys, p, LambdaTensor<double>::zero(1, 1, 2));
    const auto sym = certify(sys, p, LambdaTensor<double>::sym_sigma(sys));
    const auto best = best_correction(sys, p);
    CHECK(best.margin >= std::max(zero.margin, sym.margin) - 1e-9);
  }
}

TEST_CASE("condition blocks and correction tensors convert both ways") {
  const auto sys = builtin<double>("anisotropic_cross", {3.0, 1.0});
  Mat<double> Lambda(2, 2);
  Lambda << 0.2, 0.9, 0.9, -0.3;
  const auto lam = lambda_from_condition(sys, {Lambda});
  const auto back = condition_from_lambda(sys, lam);
  CHECK((back[0] - Lambda).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sufficient-check certificates carry their own methods") {
  const auto sys = builtin<double>("gradient_similarity", {0.3, 0.4});
  const auto ci = criterion_i(sys, 3.0);
  const auto cii = criterion_ii(sys, 3.0);
  CHECK(ci.method == Method::criterion_i);
  CHECK(cii.method == Method::criterion_ii);
  // sigma'sigma = (lam^2 + mu^2) I and skew'skew = mu^2 I for this family
  CHECK(ci.margin == doctest::Approx(2.0 - 2.0 * 0.25).epsilon(1e-12));
  CHECK(cii.margin == doctest::Approx(2.0 - 0.25 - 0.16).epsilon(1e-12));
}

TEST_CASE("invalid corrections are rejected") {
  const auto sys = builtin<double>("gradient_rotation", {0.5});
  CHECK_THROWS_AS(corrected_tensor(sys, 1.5, LambdaTensor<double>::zero(1, 1, 2)),
                  std::invalid_argument);
  auto lam = LambdaTensor<double>::zero(1, 1, 2);
  lam.entries(0, 0)(0, 1) = 1.0;  // asymmetric block
  CHECK_THROWS_AS(corrected_tensor(sys, 3.0, lam), std::invalid_argument);
  const Mat<double> eye = Mat<double>::Identity(2, 2);
  const std::vector<Mat<double>> zero_b{Mat<double>::Zero(2, 2)};
  const std::vector<Mat<double>> asym{lam.entries(0, 0)};
  CHECK_THROWS_AS(certify_1d(eye, zero_b, 3.0, asym), std::invalid_argument);
}

}  // TEST_SUITE
