#pragma once

// Bessel potential kernels
//
//   G_a^d(s) = (4 pi)^{-a/2} / Gamma(a/2) * int_0^inf exp(-pi s^2/t - t/(4 pi)) t^{-1-(d-a)/2} dt
//
// evaluated through the saddle substitution t = 2 pi s tau, which turns the
// integrand into a bump centred at tau = 1 and lets the exponential factor
// e^{-s} be carried in log space.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ends_sqfn/errors.hpp"
#include "ends_sqfn/fitting.hpp"
#include "ends_sqfn/quadrature.hpp"

namespace ends_sqfn {

/// Saddle-normalized subordination integral
///   J(s, beta) = int_0^inf exp(-(s/2)(tau + 1/tau - 2)) tau^{-1-beta} dtau,
/// folded onto (0, 1] by tau -> 1/tau. Even in beta.
template <typename Scalar = double>
Scalar saddle_integral(Scalar s, Scalar beta, const QuadratureOptions<Scalar>& opt = {}) {
  if (!(s > 0)) throw DomainError("saddle_integral: s must be positive");
  auto integrand = [s, beta](Scalar tau) -> Scalar {
    if (!(tau > 0)) return Scalar(0);
    const Scalar gap = (1 - tau) * (1 - tau) / tau;
    const Scalar base = -s / 2 * gap;
    const Scalar lt = std::log(tau);
    return std::exp(base - (1 + beta) * lt) + std::exp(base - (1 - beta) * lt);
  };
  return tanh_sinh<Scalar>(integrand, Scalar(0), Scalar(1), opt).value;
}

template <typename Scalar = double>
struct BesselSpec {
  Scalar a = 2;
  Scalar d = 3;
  int quad_points = 64;
  Scalar quad_tol = Scalar(1e-12);

  void validate() const {
    if (!(a > 0) || !(d > 0)) throw DomainError("BesselSpec: a and d must be positive");
    if (!(quad_tol > 0) || quad_tol > Scalar(1e-4)) {
      throw DomainError("BesselSpec: quad_tol must lie in (0, 1e-4]");
    }
    if (quad_points < 32) throw DomainError("BesselSpec: quad_points must be >= 32");
  }

  QuadratureOptions<Scalar> quadrature() const {
    QuadratureOptions<Scalar> opt;
    opt.initial_points = quad_points;
    opt.rel_tol = quad_tol;
    return opt;
  }
};

/// log G_a^d(s); finite for every s > 0 (no underflow for large s).
template <typename Scalar = double>
Scalar bessel_log_eval(const BesselSpec<Scalar>& spec, Scalar s) {
  spec.validate();
  if (!(s > 0)) throw DomainError("bessel_eval: s must be positive, got " + std::to_string(double(s)));
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar beta = (spec.d - spec.a) / 2;
  const Scalar log_pref = -spec.a / 2 * std::log(4 * pi) - std::lgamma(spec.a / 2);
  const Scalar t_star = 2 * pi * s;
  const Scalar j = saddle_integral<Scalar>(s, beta, spec.quadrature());
  return log_pref - beta * std::log(t_star) - s + std::log(j);
}

template <typename Scalar = double>
Scalar bessel_eval(const BesselSpec<Scalar>& spec, Scalar s) {
  return std::exp(bessel_log_eval(spec, s));
}

enum class BesselRegime { a_less_d, a_equal_d, a_greater_d };

inline const char* to_string(BesselRegime r) {
  switch (r) {
    case BesselRegime::a_less_d: return "a_less_d";
    case BesselRegime::a_equal_d: return "a_equal_d";
    case BesselRegime::a_greater_d: return "a_greater_d";
  }
  return "?";
}

template <typename Scalar = double>
BesselRegime bessel_regime(const BesselSpec<Scalar>& spec) {
  if (spec.a < spec.d) return BesselRegime::a_less_d;
  if (spec.a > spec.d) return BesselRegime::a_greater_d;
  return BesselRegime::a_equal_d;
}

/// log of the regime envelope at rate c:
///   e^{-cs}/s^{d-a}, max(1, ln(1/s)) e^{-cs}, e^{-cs}.
template <typename Scalar = double>
Scalar bessel_log_envelope(const BesselSpec<Scalar>& spec, Scalar s, Scalar c) {
  switch (bessel_regime(spec)) {
    case BesselRegime::a_less_d: return -c * s - (spec.d - spec.a) * std::log(s);
    case BesselRegime::a_equal_d: return -c * s + std::log(std::max(Scalar(1), -std::log(s)));
    case BesselRegime::a_greater_d: return -c * s;
  }
  return 0;
}

template <typename Scalar = double>
struct EnvelopeFit {
  BesselRegime regime = BesselRegime::a_less_d;
  Scalar c_lower = 0;
  Scalar c_upper = 0;
  Scalar C_lower = 0;
  Scalar C_upper = 0;
  Scalar max_violation = 0;
};

/// Default envelope grid: 16 points per decade on (0.01, 20], closed at 20.
template <typename Scalar = double>
std::vector<Scalar> default_bessel_grid() {
  std::vector<Scalar> g = log_space<Scalar>(Scalar(0.01), Scalar(20), 16);
  g.erase(g.begin());
  if (g.back() < Scalar(20)) g.push_back(Scalar(20));
  return g;
}

/// Two-sided envelope fit of G_a^d over s_grid. Throws ConvergenceError when
/// no rate in [0, 10] gives a sandwich.
template <typename Scalar = double>
EnvelopeFit<Scalar> envelope_check(const BesselSpec<Scalar>& spec, const std::vector<Scalar>& s_grid) {
  spec.validate();
  if (s_grid.empty()) throw DomainError("envelope_check: empty grid");
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (!(s_grid[i] > 0) || s_grid[i] > Scalar(50)) {
      throw DomainError("envelope_check: grid entries must lie in (0, 50]");
    }
    if (i > 0 && !(s_grid[i] > s_grid[i - 1])) throw DomainError("envelope_check: grid must be sorted");
  }
  std::vector<Scalar> log_g(s_grid.size());
  for (std::size_t i = 0; i < s_grid.size(); ++i) log_g[i] = bessel_log_eval(spec, s_grid[i]);

  SandwichProblem<Scalar> problem;
  problem.x = s_grid;
  problem.log_ratio = [&](std::size_t i, Scalar c) {
    return log_g[i] - bessel_log_envelope(spec, s_grid[i], c);
  };
  const SandwichFit<Scalar> sw = fit_sandwich(problem);
  if (sw.c_upper < 0 || sw.c_lower < 0) {
    throw ConvergenceError("envelope_check: no envelope sandwich on the grid");
  }

  EnvelopeFit<Scalar> fit;
  fit.regime = bessel_regime(spec);
  fit.c_upper = sw.c_upper;
  fit.c_lower = sw.c_lower;
  fit.C_upper = std::exp(sw.log_C_upper);
  fit.C_lower = std::exp(sw.log_C_lower);
  // Relative overshoot beyond round-off of the fitted constants.
  const Scalar slack = Scalar(1e-12);
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    const Scalar up = log_g[i] - bessel_log_envelope(spec, s_grid[i], fit.c_upper) - sw.log_C_upper;
    const Scalar lo = sw.log_C_lower - (log_g[i] - bessel_log_envelope(spec, s_grid[i], fit.c_lower));
    fit.max_violation = std::max({fit.max_violation, std::expm1(up) - slack, std::expm1(lo) - slack});
  }
  fit.max_violation = std::max(fit.max_violation, Scalar(0));
  return fit;
}

}  // namespace ends_sqfn
