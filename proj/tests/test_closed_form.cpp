#include <doctest.h>

#include <cmath>
#include <complex>

#include "spar/closed_form.hpp"
#include "spar/rng.hpp"

using namespace spar;

TEST_SUITE("closed_form") {

TEST_CASE("line solution at the origin and its modulus identity") {
  CHECK(line_solution(0, 0, 0.7, 0) == std::complex<double>(1.0, 0.0));
  CounterRng rng(stream_key(201));
  for (int i = 0; i < 100; ++i) {
    const double x = 4 * rng.u01() - 2;
    const double t = 2 * rng.u01();
    const double mu = 2 * rng.u01() - 1;
    const double w = 3 * rng.normal();
    const double D = 1 + (2 + mu * mu) * t;
    const double expect = std::exp(-(x * x - mu * mu * w * w) / D) / D;
    CHECK(std::norm(line_solution(x, t, mu, w)) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("line moment closed form at the pinned point") {
  const auto mv = line_moment(0.0, 1.0, 0.5, 4.0);
  REQUIRE(mv.finite);
  const double expect = std::pow(3.25, -2.0) / std::sqrt(1.0 - 4.0 / 13.0);
  CHECK(mv.value == doctest::Approx(expect).epsilon(1e-14));
  CHECK(mv.value == doctest::Approx(std::exp(mv.log_value)).epsilon(1e-14));
  CHECK(std::isinf(mv.blowup_time));  // 4 mu^2 < 2 + mu^2 here
}

TEST_CASE("line moment at t = 0 collapses to the initial profile") {
  const auto mv = line_moment(0.3, 0.0, 0.9, 3.0);
  REQUIRE(mv.finite);
  CHECK(mv.value == doctest::Approx(std::exp(-3.0 * 0.09 / 2.0)).epsilon(1e-14));
}

TEST_CASE("line blow-up time and the infinite-moment branch") {
  CHECK(line_blowup_time(1.2, 4.0) == doctest::Approx(1.0 / 2.32).epsilon(1e-14));
  CHECK(std::isinf(line_blowup_time(0.5, 4.0)));
  const auto mv = line_moment(0.0, 0.5, 1.2, 4.0);
  CHECK_FALSE(mv.finite);
  CHECK(mv.blowup_time == doctest::Approx(1.0 / 2.32).epsilon(1e-14));
  // finite strictly before the blow-up time
  CHECK(line_moment(0.0, 0.4, 1.2, 4.0).finite);
}

TEST_CASE("line moment against direct Monte Carlo") {
  const double x = 0.0, t = 1.0, mu = 0.5, p = 4.0;
  const auto mv = line_moment(x, t, mu, p);
  const std::int64_t n = 100000;
  double sum = 0, sumsq = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = std::sqrt(t) * normal_at(2024, static_cast<std::uint64_t>(i), 0, 0);
    const double s = std::pow(std::abs(line_solution(x, t, mu, w)), p);
    sum += s;
    sumsq += s * s;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / n);
  CHECK(std::abs(mean - mv.value) < 4 * se);
}

TEST_CASE("torus mode magnitudes and the zero mode") {
  CHECK(torus_mode(0, 1.3, 0.4, 0.5, 2.0) == std::complex<double>(1.0, 0.0));
  CounterRng rng(stream_key(202));
  for (int i = 0; i < 50; ++i) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.u01() * 4);
    const double t = 2 * rng.u01();
    const double lam = rng.u01() - 0.5;
    const double mu = rng.u01() - 0.5;
    const double w = 2 * rng.normal();
    const double f = torus_f(t, lam, mu);
    CHECK(std::norm(torus_mode(n, t, lam, mu, w)) ==
          doctest::Approx(std::exp(-f * n * n - 2 * mu * n * w)).epsilon(1e-12));
    CHECK(std::abs(torus_mode(-n, t, lam, mu, w)) ==
          doctest::Approx(std::abs(torus_mode(n, t, lam, mu, -w))).epsilon(1e-12));
  }
}

TEST_CASE("initial mode sum matches the theta value") {
  double s = 1;
  for (int n = 1; n <= 6; ++n) s += 2 * std::exp(-2.0 * n * n);
  CHECK(torus_l2_norm_sq(0, 0.3, 0.4, 0) == doctest::Approx(k_two_pi * s).epsilon(1e-13));
  CHECK(s == doctest::Approx(1.2713415226).epsilon(1e-9));
}

TEST_CASE("norm never drops below any single retained mode") {
  CounterRng rng(stream_key(203));
  for (int i = 0; i < 100; ++i) {
    const double t = 3 * rng.u01();
    const double lam = rng.u01() - 0.5;
    const double mu = rng.u01() - 0.5;
    const double w = 4 * rng.normal();
    const double f = torus_f(t, lam, mu);
    const double nsq = torus_l2_norm_sq(t, lam, mu, w);
    for (std::int64_t n = -3; n <= 3; ++n)
      CHECK(nsq >= k_two_pi * std::exp(-f * n * n - 2 * mu * n * w) - 1e-12);
  }
}

TEST_CASE("truncation level is minimal for its tail criterion") {
  const double t = 1.0, lam = 0.3, mu = 0.6, w = 2.5;
  const double f = torus_f(t, lam, mu);
  const double mw = std::abs(mu * w);
  const double peak = std::max(0.0, -f + mw * mw / f);
  const auto crit = [&](std::int64_t n) {
    return f * static_cast<double>(n) * n - 2 * mw * static_cast<double>(n) - peak > 70;
  };
  const std::int64_t n_max = torus_n_max(t, lam, mu, w);
  CHECK(crit(n_max));
  if (n_max > 1) CHECK_FALSE(crit(n_max - 1));
  CHECK(torus_n_max(t, lam, mu, 10.0) >= n_max);
}

TEST_CASE("non-contracting mode sums are rejected") {
  CHECK_THROWS_AS(torus_n_max(1.0, 3.0, 0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(torus_l2_norm_sq(1.0, 3.0, 0.0, 0.0), std::domain_error);
}

TEST_CASE("absurd truncation demands overflow loudly") {
  try {
    torus_n_max(1.0, 0.0, 1.0, 2e7);
    FAIL("expected TruncationOverflow");
  } catch (const TruncationOverflow& e) {
    CHECK(e.required > k_n_max_cap);
  }
}

TEST_CASE("log norm agrees with the plain norm and survives huge drifts") {
  const double t = 0.8, lam = 0.4, mu = 0.5;
  for (double w : {-2.0, 0.0, 1.5}) {
    const std::int64_t n_max = torus_n_max(t, lam, mu, w);
    CHECK(torus_log_l2_norm_sq(t, lam, mu, w, n_max) ==
          doctest::Approx(std::log(torus_l2_norm_sq(t, lam, mu, w))).epsilon(1e-12));
  }
  const double big_w = 500.0;
  const std::int64_t n_max = torus_n_max(t, lam, mu, big_w);
  CHECK(std::isinf(torus_l2_norm_sq(t, lam, mu, big_w, n_max)));
  CHECK(std::isfinite(torus_log_l2_norm_sq(t, lam, mu, big_w, n_max)));
}

TEST_CASE("torus blow-up time closed form") {
  // bitwise equal to the re-derived arithmetic; the rounded inputs put the
  // exact value within one part in 1e15 of 12.5
  CHECK(blowup_time(1.2, 0.6, 3.0) == 2.0 / (1.2 * 1.2 + (3.0 - 1) * 0.6 * 0.6 - 2));
  CHECK(blowup_time(1.2, 0.6, 3.0) == doctest::Approx(12.5).epsilon(1e-12));
  CHECK(std::isinf(blowup_time(0.5, 0.5, 4.0)));  // eps = -1
  CHECK(blowup_time(0.0, 0.9, 4.0) == doctest::Approx(2.0 / (3 * 0.81 - 2)).epsilon(1e-14));
}

TEST_CASE("moment finiteness tracks the analytic threshold") {
  CounterRng rng(stream_key(204));
  int finite_seen = 0, infinite_seen = 0;
  for (int i = 0; i < 30; ++i) {
    double lam, mu;
    do {
      lam = 2.6 * rng.u01() - 1.3;
      mu = 2.6 * rng.u01() - 1.3;
    } while (lam * lam + mu * mu >= 1.9);
    const double p = 2 + 4 * rng.u01();
    const double t = 20 * rng.u01();
    const double bt = blowup_time(lam, mu, p);
    const auto mv = torus_l2_moment(t, lam, mu, p);
    CHECK(mv.finite == (t < bt));
    CHECK(mv.blowup_time == bt);
    (mv.finite ? finite_seen : infinite_seen)++;
  }
  CHECK(finite_seen > 0);
  CHECK(infinite_seen > 0);
}

TEST_CASE("second moment matches the independent Gaussian sum") {
  const double t = 1.5, lam = 0.5, mu = 0.5;
  double sum = 1;
  for (std::int64_t n = 1;; ++n) {
    const double term =
        2 * std::exp((-torus_f(t, lam, mu) + 2 * mu * mu * t) * static_cast<double>(n) * n);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  const auto mv = torus_l2_moment(t, lam, mu, 2.0);
  REQUIRE(mv.finite);
  CHECK(mv.value == doctest::Approx(k_two_pi * sum).epsilon(1e-9));
}

TEST_CASE("zero time and zero noise moments are deterministic") {
  const auto at_zero = torus_l2_moment(0.0, 0.4, 0.3, 5.0);
  REQUIRE(at_zero.finite);
  CHECK(at_zero.value ==
        doctest::Approx(std::pow(torus_l2_norm_sq(0, 0.4, 0.3, 0), 2.5)).epsilon(1e-12));
  const auto no_noise = torus_l2_moment(2.0, 0.7, 0.0, 3.0);
  REQUIRE(no_noise.finite);
  CHECK(no_noise.value ==
        doctest::Approx(std::pow(torus_l2_norm_sq(2.0, 0.7, 0.0, 0), 1.5)).epsilon(1e-12));
}

TEST_CASE("quadrature moment against direct Monte Carlo") {
  const double t = 1.0, lam = 0.5, mu = 0.5, p = 4.0;
  const auto mv = torus_l2_moment(t, lam, mu, p);
  REQUIRE(mv.finite);
  CHECK(mv.detail.nodes >= 200);
  const std::int64_t n = 200000;
  double sum = 0, sumsq = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = std::sqrt(t) * normal_at(4096, static_cast<std::uint64_t>(i), 0, 0);
    const double s = std::pow(torus_l2_norm_sq(t, lam, mu, w), p / 2);
    sum += s;
    sumsq += s * s;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / n);
  CHECK(std::abs(mean - mv.value) < 4 * se);
}

TEST_CASE("moment argument validation") {
  CHECK_THROWS_AS(torus_l2_moment(1.0, 1.3, 0.8, 2.0), std::domain_error);
  CHECK_THROWS_AS(torus_l2_moment(1.0, 0.5, 0.5, 1.9), std::invalid_argument);
  CHECK_THROWS_AS(torus_l2_moment(-1.0, 0.5, 0.5, 2.0), std::invalid_argument);
}

}  // TEST_SUITE
