#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ends_sqfn/bessel.hpp"

using namespace ends_sqfn;

namespace {

constexpr double pi = std::numbers::pi;

// Independent oracle: int_0^inf t^{-1-b} e^{-A/t - Bt} dt = 2 (A/B)^{-b/2} K_b(2 sqrt(AB))
// with A = pi s^2, B = 1/(4 pi).
double bessel_oracle(double a, double d, double s) {
  const double b = (d - a) / 2;
  return std::pow(4 * pi, -a / 2) / std::tgamma(a / 2) * 2 * std::pow(2 * pi * s, -b) *
         std::cyl_bessel_k(std::abs(b), s);
}

BesselSpec<double> spec(double a, double d) {
  BesselSpec<double> s;
  s.a = a;
  s.d = d;
  return s;
}

}  // namespace

TEST_CASE("closed forms on d - a = +-1") {
  CHECK(bessel_eval(spec(2, 1), 1.0) == doctest::Approx(std::exp(-1.0) / 2).epsilon(1e-10));
  CHECK(bessel_eval(spec(2, 3), 1.0) == doctest::Approx(std::exp(-1.0) / (4 * pi)).epsilon(1e-10));
  CHECK(bessel_eval(spec(2, 3), 5.0) > 0);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(std::log(0.01), std::log(20.0));
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double s = std::exp(u(rng));
    const double g1 = bessel_eval(spec(2, 1), s);
    const double g3 = bessel_eval(spec(2, 3), s);
    worst = std::max(worst, std::abs(g1 / (std::exp(-s) / 2) - 1));
    worst = std::max(worst, std::abs(g3 / (std::exp(-s) / (4 * pi * s)) - 1));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("agrees with the Macdonald-function representation") {
  for (double a : {1.0, 2.0, 3.0, 4.0}) {
    for (double d : {1.0, 2.0, 3.0, 4.0}) {
      for (double s : {0.013, 0.4, 2.0, 17.0}) {
        CAPTURE(a);
        CAPTURE(d);
        CAPTURE(s);
        CHECK(bessel_eval(spec(a, d), s) == doctest::Approx(bessel_oracle(a, d, s)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("large arguments stay finite in log space") {
  const double lg = bessel_log_eval(spec(2, 3), 900.0);
  CHECK(lg == doctest::Approx(-900.0 - std::log(4 * pi * 900.0)).epsilon(1e-12));
  CHECK(std::isfinite(bessel_log_eval(spec(1, 4), 5000.0)));
}

TEST_CASE("positivity, monotonicity, quadrature self-consistency") {
  const auto grid = default_bessel_grid<double>();
  for (double a : {1.0, 2.0, 3.0, 4.0}) {
    for (double d : {1.0, 2.0, 3.0, 4.0}) {
      auto sp = spec(a, d);
      sp.quad_tol = 1e-10;
      auto sp2 = sp;
      sp2.quad_points = 2 * sp.quad_points;
      double prev = INFINITY;
      for (double s : grid) {
        const double g = bessel_eval(sp, s);
        REQUIRE(g > 0);
        CHECK(g < prev);
        prev = g;
        CHECK(std::abs(bessel_eval(sp2, s) / g - 1) <= sp.quad_tol);
      }
    }
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(bessel_eval(spec(2, 3), 0.0), DomainError);
  CHECK_THROWS_AS(bessel_eval(spec(2, 3), -1.0), DomainError);
  auto bad = spec(2, 3);
  bad.quad_tol = 1e-3;
  CHECK_THROWS_AS(bessel_eval(bad, 1.0), DomainError);
  bad = spec(2, 3);
  bad.quad_points = 16;
  CHECK_THROWS_AS(bessel_eval(bad, 1.0), DomainError);
}

TEST_CASE("envelope fits") {
  const auto grid = default_bessel_grid<double>();
  CHECK(grid.size() == 53);
  CHECK(grid.back() == 20.0);

  SUBCASE("a < d: exact e^{-s}/(4 pi s)") {
    const auto fit = envelope_check(spec(2, 3), grid);
    CHECK(fit.regime == BesselRegime::a_less_d);
    CHECK(fit.c_upper == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(fit.C_upper == doctest::Approx(1 / (4 * pi)).epsilon(1e-5));
    CHECK(fit.max_violation == 0.0);
  }
  SUBCASE("a > d: exact e^{-s}/2") {
    const auto fit = envelope_check(spec(2, 1), grid);
    CHECK(fit.regime == BesselRegime::a_greater_d);
    CHECK(fit.c_upper == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(fit.C_upper == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(fit.C_lower == doctest::Approx(0.5).epsilon(1e-5));
  }
  SUBCASE("a = d: logarithmic regime bounded both ways near the origin") {
    const auto small = log_space<double>(0.01, 1.0, 16);
    const auto fit = envelope_check(spec(2, 2), small);
    CHECK(fit.regime == BesselRegime::a_equal_d);
    CHECK(fit.max_violation == 0.0);
    CHECK(fit.C_lower > 0);
    for (double s : small) {
      const double ratio = bessel_eval(spec(2, 2), s) / std::max(1.0, std::log(1 / s));
      CHECK(ratio >= fit.C_lower * std::exp(-fit.c_lower * s) * (1 - 1e-9));
      CHECK(ratio <= fit.C_upper * std::exp(-fit.c_upper * s) * (1 + 1e-9));
    }
  }
  SUBCASE("every (a, d) in {1..4}^2 gives a two-sided sandwich") {
    for (double a : {1.0, 2.0, 3.0, 4.0}) {
      for (double d : {1.0, 2.0, 3.0, 4.0}) {
        const auto fit = envelope_check(spec(a, d), grid);
        CAPTURE(a);
        CAPTURE(d);
        CHECK(fit.max_violation == 0.0);
        CHECK(fit.c_upper > 0);
        CHECK(fit.c_lower >= fit.c_upper);
      }
    }
  }
}
