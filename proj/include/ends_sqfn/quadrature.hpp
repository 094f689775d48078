#pragma once

// Quadrature rules shared by the kernel, envelope and transform modules.
//
//  * tanh_sinh       double-exponential rule on a finite interval, adaptive by
//                    step halving; tolerant of endpoint singularities.
//  * GaussLegendre   fixed rule on [-1, 1], used panel-wise for smooth
//                    (possibly oscillatory) integrands.
//  * log_space       logarithmically spaced sample grids.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ends_sqfn/errors.hpp"

namespace ends_sqfn {

template <typename Scalar = double>
struct QuadratureOptions {
  int initial_points = 64;
  Scalar rel_tol = Scalar(1e-12);
  int max_refinements = 10;
  // Half-width of the truncated t-range; tanh((pi/2) sinh 4) differs from 1 by ~1e-37.
  Scalar t_max = Scalar(4);
};

template <typename Scalar = double>
struct QuadratureResult {
  Scalar value = 0;
  Scalar error_estimate = 0;
  int evaluations = 0;
  int levels = 0;
};

/// Integrates f over [a, b] with the tanh-sinh transform
///   x = (a+b)/2 + (b-a)/2 tanh((pi/2) sinh t).
/// Nodes close to an endpoint are formed from the endpoint distance so that
/// integrands with endpoint singularities see no cancellation. Throws
/// ConvergenceError when successive halvings disagree by more than rel_tol
/// after max_refinements levels.
template <typename Scalar, typename F>
QuadratureResult<Scalar> tanh_sinh(F&& f, Scalar a, Scalar b,
                                   const QuadratureOptions<Scalar>& opt = {}) {
  using std::cosh;
  using std::exp;
  using std::sinh;
  const Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  const Scalar half_width = (b - a) / 2;

  auto term = [&](Scalar t) -> Scalar {
    const Scalar z = half_pi * sinh(t);
    const Scalar cz = cosh(z);
    const Scalar w = half_width * half_pi * cosh(t) / (cz * cz);
    if (!(w > 0)) return Scalar(0);
    Scalar x;
    if (t <= 0) {
      x = a + 2 * half_width / (1 + exp(-2 * z));
    } else {
      x = b - 2 * half_width / (1 + exp(2 * z));
    }
    const Scalar fx = f(x);
    return w * fx;
  };

  if (opt.initial_points < 3) throw DomainError("tanh_sinh: initial_points must be >= 3");
  QuadratureResult<Scalar> out;
  Scalar h = 2 * opt.t_max / Scalar(opt.initial_points - 1);
  Scalar sum = 0;
  for (int i = 0; i < opt.initial_points; ++i) {
    sum += term(-opt.t_max + Scalar(i) * h);
  }
  out.evaluations = opt.initial_points;
  Scalar estimate = h * sum;
  for (int level = 1; level <= opt.max_refinements; ++level) {
    const int fresh = opt.initial_points - 1;
    const int stride = 1 << (level - 1);
    const Scalar h_new = h / 2;
    for (int i = 0; i < fresh * stride; ++i) {
      sum += term(-opt.t_max + (Scalar(2 * i + 1)) * h_new);
    }
    out.evaluations += fresh * stride;
    h = h_new;
    const Scalar refined = h * sum;
    const Scalar diff = std::abs(refined - estimate);
    estimate = refined;
    out.levels = level;
    if (diff <= opt.rel_tol * std::abs(refined)) {
      out.value = refined;
      out.error_estimate = diff;
      return out;
    }
  }
  throw ConvergenceError("tanh_sinh: tolerance " + std::to_string(double(opt.rel_tol)) +
                         " not met within " + std::to_string(out.evaluations) + " points");
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
template <typename Scalar = double>
struct GaussLegendre {
  std::vector<Scalar> nodes;
  std::vector<Scalar> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    const Scalar pi = std::numbers::pi_v<Scalar>;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      Scalar x = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
      Scalar dp = 0;
      for (int it = 0; it < 100; ++it) {
        Scalar p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        const Scalar dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 4 * std::numeric_limits<Scalar>::epsilon()) break;
      }
      Scalar p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = weights[n - 1 - i] = 2 / ((1 - x * x) * dp * dp);
    }
  }

  /// Composite rule: [a, b] split into `panels` equal panels.
  template <typename F>
  Scalar integrate(F&& f, Scalar a, Scalar b, int panels = 1) const {
    const Scalar width = (b - a) / Scalar(panels);
    Scalar total = 0;
    for (int p = 0; p < panels; ++p) {
      const Scalar lo = a + width * Scalar(p);
      const Scalar mid = lo + width / 2;
      Scalar acc = 0;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        acc += weights[i] * f(mid + width / 2 * nodes[i]);
      }
      total += acc * width / 2;
    }
    return total;
  }
};

/// Grid lo * 10^(i / per_decade) for i = 0.. while the value is <= hi (within
/// rounding); the last point is hi itself when hi lies on the lattice.
template <typename Scalar = double>
std::vector<Scalar> log_space(Scalar lo, Scalar hi, int per_decade) {
  if (!(lo > 0) || !(hi >= lo) || per_decade < 1) {
    throw DomainError("log_space: need 0 < lo <= hi and per_decade >= 1");
  }
  const Scalar decades = std::log10(hi / lo);
  const int count = int(std::floor(decades * per_decade + Scalar(1e-9))) + 1;
  std::vector<Scalar> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.push_back(lo * std::pow(Scalar(10), Scalar(i) / Scalar(per_decade)));
  }
  return out;
}

/// Same as log_space but with `count` points spanning [lo, hi] inclusive.
template <typename Scalar = double>
std::vector<Scalar> log_linspace(Scalar lo, Scalar hi, int count) {
  if (!(lo > 0) || !(hi >= lo) || count < 1) {
    throw DomainError("log_linspace: need 0 < lo <= hi and count >= 1");
  }
  std::vector<Scalar> out(count);
  const Scalar step = count > 1 ? std::log(hi / lo) / Scalar(count - 1) : Scalar(0);
  for (int i = 0; i < count; ++i) out[i] = lo * std::exp(step * Scalar(i));
  if (count > 1) out.back() = hi;
  return out;
}

}  // namespace ends_sqfn
