#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ends_sqfn/highenergy.hpp"

using namespace ends_sqfn;

namespace {

constexpr double pi = std::numbers::pi;

// int e^{-i xi l} (l^2 + k^2)^{-M} dl = 2 sqrt(pi)/Gamma(M) (|xi|/(2k))^{M-1/2} K_{M-1/2}(k|xi|)
double macdonald_transform(int M, double k, double xi) {
  const double nu = M - 0.5;
  return 2 * std::sqrt(pi) / std::tgamma(M) * std::pow(xi / (2 * k), nu) * std::cyl_bessel_k(nu, k * xi);
}

// Direct cosine quadrature of the same transform on [0, L] plus two
// integration-by-parts tail terms.
double direct_transform(int M, double k, double xi) {
  const GaussLegendre<double> gl(20);
  const double L = 2000;
  auto f = [&](double l) { return std::pow(l * l + k * k, -M); };
  auto df = [&](double l) { return -2.0 * M * l * std::pow(l * l + k * k, -M - 1); };
  const double body = gl.integrate([&](double l) { return std::cos(xi * l) * f(l); }, 0.0, L, 4000);
  const double tail = -std::sin(xi * L) * f(L) / xi - std::cos(xi * L) * df(L) / (xi * xi);
  return 2 * (body + tail);
}

}  // namespace

TEST_CASE("closed forms of the transform") {
  for (double x : {0.0, 0.3, 2.0, 9.0}) {
    CHECK(fm_eval<double>(1, 1.0, {x})[0] == doctest::Approx(pi * std::exp(-x)).epsilon(1e-14));
    CHECK(fm_eval<double>(2, 1.0, {x})[0] == doctest::Approx(pi / 2 * (1 + x) * std::exp(-x)).epsilon(1e-14));
  }
  for (int M : {1, 2, 3, 4}) {
    for (double k : {1.0, 2.0, 5.0}) {
      // value at the origin: int (l^2 + k^2)^{-M} dl
      const double origin = std::sqrt(pi) * std::tgamma(M - 0.5) / std::tgamma(M) * std::pow(k, 1 - 2 * M);
      CHECK(fm_eval<double>(M, k, {0.0})[0] == doctest::Approx(origin).epsilon(1e-13));
      for (double xi : {0.1, 1.0, 3.0, 7.0}) {
        CAPTURE(M);
        CAPTURE(k);
        CAPTURE(xi);
        CHECK(fm_eval<double>(M, k, {xi})[0] == doctest::Approx(macdonald_transform(M, k, xi)).epsilon(1e-10));
        CHECK(fm_eval<double>(M, k, {-xi})[0] == fm_eval<double>(M, k, {xi})[0]);
      }
    }
  }
  CHECK_THROWS_AS(fm_terms<double>(5), DomainError);
  CHECK_THROWS_AS(fm_eval<double>(1, 0.5, {1.0}), DomainError);
}

TEST_CASE("agrees with a direct numerical transform") {
  for (int M : {1, 2, 3}) {
    for (double k : {1.0, 2.0, 5.0}) {
      for (double xi : {0.5, 1.0, 2.0}) {
        CAPTURE(M);
        CAPTURE(k);
        CAPTURE(xi);
        CHECK(fm_eval<double>(M, k, {xi})[0] == doctest::Approx(direct_transform(M, k, xi)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("window") {
  for (double x : {0.0, 0.2, 0.5, -0.5}) CHECK(window(x) == 1.0);
  for (double x : {1.0, 1.3, -2.0}) CHECK(window(x) == 0.0);
  double prev = 1;
  for (double x = 0.5; x <= 1.0; x += 0.01) {
    CHECK(window(x) <= prev);
    prev = window(x);
  }
  // C^2 joins: one-sided second differences vanish at both ends of the ramp
  const double h = 1e-4;
  CHECK(std::abs(window(0.5 + 2 * h) - 2 * window(0.5 + h) + window(0.5)) / (h * h) < 0.1);
  CHECK(std::abs(window(1.0 - 2 * h) - 2 * window(1.0 - h) + window(1.0)) / (h * h) < 0.1);
}

TEST_CASE("split into G and H") {
  std::vector<double> lambdas;
  for (int i = 0; i <= 80; ++i) lambdas.push_back(0.25 * i);

  for (int M : {1, 2, 3}) {
    for (double r : {1.0, 3.0, 8.0}) {
      for (double k : {1.0, 4.0, 10.0}) {
        SplitSpec<double> s;
        s.M = M;
        s.r = r;
        s.k = k;
        s.lambda_max = 20;
        const auto res = split_eval(s, lambdas);
        CAPTURE(M);
        CAPTURE(r);
        CAPTURE(k);
        CHECK(res.reconstruction_error <= 1e-8);
        CHECK(hat_h_support_error(s) <= 1e-10);
      }
    }
  }
  SUBCASE("small r hands the whole symbol to H") {
    // |G| <= (1/pi) int_0^r hat R = r hat R(0)/pi -> 0 with r
    for (double r : {0.02, 0.002}) {
      SplitSpec<double> s;
      s.r = r;
      const auto res = split_eval(s, std::vector<double>{0.0, 1.0, 3.0});
      for (std::size_t i = 0; i < res.lambda.size(); ++i) {
        const double full = 1 / (res.lambda[i] * res.lambda[i] + 1);
        CHECK(std::abs(res.G[i]) <= r);
        CHECK(std::abs(res.H[i] - full) <= r);
      }
    }
  }
  SUBCASE("guards") {
    SplitSpec<double> s;
    s.M = 4;
    s.xi_max = 25;
    CHECK_THROWS_AS(s.validate(), DomainError);
    s = SplitSpec<double>{};
    s.fft_points = 1 << 13;
    CHECK_THROWS_AS(s.validate(), DomainError);
    s.fft_points = 20000;
    CHECK_THROWS_AS(s.validate(), DomainError);
    s = SplitSpec<double>{};
    s.k = 0.5;
    CHECK_THROWS_AS(s.validate(), DomainError);
  }
}

TEST_CASE("exponential bound on sup |H|") {
  const std::vector<double> rg{1, 1.5, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<double> kg{1, 2, 3, 5, 7, 10};
  std::vector<double> rates;
  for (int M : {1, 2, 3}) {
    const auto fit = h_sup_bound(M, rg, kg);
    CAPTURE(M);
    CHECK(fit.pass);
    CHECK(fit.c >= 0.3);
    CHECK(fit.residual <= 0.25);
    rates.push_back(fit.c);
    for (std::size_t j = 0; j < kg.size(); ++j) {
      for (std::size_t i = 0; i < rg.size(); ++i) {
        // positive transform: the sup sits at lambda = 0
        CHECK(fit.argmax_lambda[j][i] == 0.0);
        CHECK(fit.sup[j][i] <= fit.C * std::exp(-fit.c * kg[j] * rg[i]) * (1 + 1e-12));
        if (i > 0) CHECK(fit.sup[j][i] <= fit.sup[j][i - 1]);
      }
    }
    // k = 1: r = 1 vs r = 2
    CHECK(fit.sup[0][2] / fit.sup[0][0] <= std::exp(-fit.c) * 1.25);
  }
  const double mean = (rates[0] + rates[1] + rates[2]) / 3;
  for (double c : rates) CHECK(std::abs(c - mean) / mean <= 0.25);

  CHECK_THROWS_AS(h_sup_bound(1, std::vector<double>{0.5, 2.0}, kg), DomainError);
  CHECK_THROWS_AS(h_sup_bound(1, rg, std::vector<double>{20.0}), DomainError);
}
