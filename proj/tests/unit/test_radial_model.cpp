#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ends_sqfn/quadrature.hpp"
#include "ends_sqfn/radial_model.hpp"

using namespace ends_sqfn;

namespace {

ModelManifold<double> two_ends(double r_max = 1e6, int ppd = 64) {
  return build_model<double>({{3, 1.0, r_max, ppd}, {4, 1.0, r_max, ppd}});
}

Vector<double> random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector<double> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

// int_1^{r_max} r^{n-1} (r^{-(n/p)(1+eps)} phi(r))^p dr with phi the log-smoothstep on [1, 2],
// by Gauss-Legendre in u = ln r (ramp and tail panels separately).
double witness_norm_oracle(int n, double p, double eps, double r_max) {
  GaussLegendre<double> gl(40);
  auto integrand = [&](double u) {
    const double t = std::clamp(u / std::log(2.0), 0.0, 1.0);
    const double phi = t * t * (3 - 2 * t);
    return std::exp(-n * eps * u) * std::pow(phi, p);
  };
  const double ramp = gl.integrate(integrand, 0.0, std::log(2.0), 4);
  const double tail = gl.integrate(integrand, std::log(2.0), std::log(r_max), 64);
  return std::pow(ramp + tail, 1 / p);
}

}  // namespace

TEST_CASE("grid arithmetic") {
  const auto model = two_ends();
  CHECK(model.size() == 769);
  CHECK(model.n_min() == 3);
  CHECK(model.end_size(0) == 384);
  CHECK(model.end_of(0) == -1);
  CHECK(model.end_of(1) == 0);
  CHECK(model.end_of(769 - 1) == 1);
  CHECK(model.hub_measure() == doctest::Approx(1.0 / 3 + 1.0 / 4));
  CHECK(model.radius()(model.end_offset(0)) == 1.0);
  CHECK(model.boundary_node(model.end_offset(0) + 383));
  CHECK_FALSE(model.boundary_node(model.end_offset(0) + 382));
}

TEST_CASE("rejections") {
  CHECK_THROWS_AS(build_model<double>({{2, 1.0, 1e6, 64}}), DomainError);
  CHECK_THROWS_AS(build_model<double>({{3, 1.0, 1e6, 10}}), DomainError);
  CHECK_THROWS_AS(build_model<double>({{3, 1.0, 1e2, 64}}), DomainError);
  CHECK_THROWS_AS(build_model<double>({}), DomainError);
  std::vector<EndProfile<double>> nine(9, EndProfile<double>{3, 1.0, 1e6, 64});
  CHECK_THROWS_AS(build_model<double>(nine), DomainError);
}

TEST_CASE("ball volumes") {
  const auto model = two_ends();
  CHECK(ball_volume(model, 0, 10.0) - ball_volume(model, 0, 1.0) == doctest::Approx(333.0).epsilon(1e-9));
  for (int i : {0, 1}) {
    const int n = model.end(i).n;
    for (double r : log_space<double>(10.0, 1e5, 7)) {
      CHECK(ball_volume(model, i, r) == doctest::Approx(std::pow(r, n) / n).epsilon(0.05));
    }
  }
  SUBCASE("non-doubling witness at r = 1e3") {
    const double v4 = ball_volume(model, 1, 2e3) / ball_volume(model, 1, 1e3);
    const double v3 = ball_volume(model, 0, 2e3) / ball_volume(model, 0, 1e3);
    CHECK(v4 >= 15);
    CHECK(v3 <= 9);
  }
  SUBCASE("refinement stability") {
    const auto fine = two_ends(1e6, 128);
    for (double r : {3.0, 57.0, 1e3, 8e4}) {
      for (int i : {0, 1}) {
        CHECK(std::abs(ball_volume(fine, i, r) / ball_volume(model, i, r) - 1) < 0.01);
      }
    }
  }
}

TEST_CASE("Laplacian identities") {
  const auto model = two_ends();
  std::mt19937_64 rng(5);

  SUBCASE("constants are harmonic away from the Dirichlet rows") {
    const Vector<double> one = Vector<double>::Ones(model.size());
    const Vector<double> d = laplacian_apply(model, one);
    for (Eigen::Index v = 0; v < model.size(); ++v) {
      if (!model.boundary_node(v)) CHECK(d(v) == 0.0);
    }
  }
  SUBCASE("summation by parts and self-adjointness") {
    for (int t = 0; t < 50; ++t) {
      const Vector<double> f = random_vector(model.size(), rng);
      const Vector<double> g = random_vector(model.size(), rng);
      const double lhs = inner(model, laplacian_apply(model, f), g);
      const double rhs = inner(model, f, laplacian_apply(model, g));
      const double fn = std::sqrt(inner(model, f, f)), gn = std::sqrt(inner(model, g, g));
      CHECK(std::abs(lhs - rhs) <= 1e-12 * fn * gn);
      const double q = quadratic_form(model, f);
      CHECK(q >= 0);
      CHECK(inner(model, laplacian_apply(model, f), f) == doctest::Approx(q).epsilon(1e-12));
    }
  }
  SUBCASE("stiffness matrix agrees with the edge loop") {
    const Vector<double> f = random_vector(model.size(), rng);
    const Vector<double> a = model.stiffness() * f;
    const Vector<double> b = laplacian_apply(model, f).cwiseProduct(model.measure());
    CHECK((a - b).norm() <= 1e-12 * a.norm());
  }
}

TEST_CASE("cutoff") {
  const auto model = two_ends();
  const auto phi = cutoff(model, 0, 1.0, 2.0);
  const Eigen::Index off = model.end_offset(0);
  for (Eigen::Index m = 0; m < model.end_size(0); ++m) {
    const double r = model.radius()(off + m);
    if (r >= 2.0) CHECK(phi.values(off + m) == 1.0);
    if (r <= 1.0) CHECK(phi.values(off + m) == 0.0);
    if (std::abs(r / std::sqrt(2.0) - 1) < 1e-12) CHECK(phi.values(off + m) == doctest::Approx(0.5));
  }
  // Node at r = 4 and the geometric midpoint of a ramp lying on the lattice.
  const auto wide = cutoff(model, 0, 1.0, std::pow(10.0, 2.0 / 64));
  CHECK(wide.values(off + 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(phi.values(off + 39) == 1.0);  // r = 10^{39/64} ~ 4.07
  CHECK(phi.values(0) == 0.0);
  for (Eigen::Index m = 0; m < model.end_size(1); ++m) CHECK(phi.values(model.end_offset(1) + m) == 0.0);
  CHECK_THROWS_AS(cutoff(model, 0, 2.0, 1.0), DomainError);
  CHECK_THROWS_AS(cutoff(model, 0, 1.0, 1e5), DomainError);
  CHECK_THROWS_AS(cutoff(model, 2, 1.0, 2.0), DomainError);
}

TEST_CASE("witness functions") {
  const auto model = build_model<double>({{3, 1.0, 1e9, 64}, {4, 1.0, 1e9, 64}});
  const auto f = witness_function(model, 0, 3.0, 0.2, 1.0, 2.0);
  const Eigen::Index off = model.end_offset(0);
  CHECK(f.values(off) == 0.0);
  CHECK(f.values(0) == 0.0);
  CHECK(f.warnings.empty());
  CHECK(f.support_size() == model.end_size(0) - 1);

  auto norm = [&](const Vector<double>& g, double p) {
    double acc = 0;
    for (Eigen::Index v = 0; v < model.size(); ++v) acc += model.measure()(v) * std::pow(std::abs(g(v)), p);
    return std::pow(acc, 1 / p);
  };
  SUBCASE("norm agrees with the ramp-aware radial integral") {
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
      for (double p : {2.0, 3.0, 6.0}) {
        const auto w = witness_function(model, 0, p, eps, 1.0, 2.0);
        CHECK(norm(w.values, p) == doctest::Approx(witness_norm_oracle(3, p, eps, 1e9)).epsilon(0.02));
      }
    }
  }
  SUBCASE("closed-form norm once the ramp is negligible") {
    const auto w = witness_function(model, 0, 3.0, 0.05, 1.0, 2.0);
    CHECK(norm(w.values, 3.0) == doctest::Approx(witness_norm_estimate(3, 3.0, 0.05, 1e9)).epsilon(0.05));
    CHECK(witness_norm_estimate(3, 3.0, 0.2, 1e9) == doctest::Approx(std::cbrt((1 - std::pow(1e9, -0.6)) / 0.6)));
  }
  SUBCASE("eps^{-1/p} scaling of the untruncated norm") {
    const double a = witness_norm_estimate(3, 3.0, 0.02, 1e300);
    const double b = witness_norm_estimate(3, 3.0, 0.01, 1e300);
    CHECK(b / a == doctest::Approx(std::cbrt(2.0)).epsilon(1e-9));
  }
  SUBCASE("truncation warning") {
    const auto small = build_model<double>({{3, 1.0, 1e3, 64}});
    const auto w = witness_function(small, 0, 3.0, 0.05, 1.0, 2.0);
    CHECK(w.warnings.size() == 1);
    CHECK(witness_truncated(3, 0.05, 1e9) == false);
  }
  CHECK_THROWS_AS(witness_function(model, 0, 1.0, 0.2, 1.0, 2.0), DomainError);
  CHECK_THROWS_AS(witness_function(model, 0, 3.0, 0.0, 1.0, 2.0), DomainError);
}

TEST_CASE("CSV dump") {
  const auto model = two_ends();
  std::ostringstream os;
  write_model_csv(model, os);
  const std::string s = os.str();
  CHECK(s.rfind("node,end,radius,measure,boundary\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 770);
}
