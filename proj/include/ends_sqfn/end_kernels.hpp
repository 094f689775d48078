#pragma once

// Resolvent kernels (Delta + k^2)^{-j} on model ends R^n x T^m (flat torus
// cross-section), by heat-kernel subordination on R^N plus an image sum over
// the torus lattice, and fitted checks of their two-sided envelopes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ends_sqfn/bessel.hpp"
#include "ends_sqfn/errors.hpp"
#include "ends_sqfn/fitting.hpp"
#include "ends_sqfn/quadrature.hpp"

namespace ends_sqfn {

template <typename Scalar = double>
struct EndGeometry {
  int n = 3;
  int m = 0;
  std::vector<Scalar> torus_circumferences;

  int N() const { return n + m; }

  void validate() const {
    if (n < 1) throw DomainError("EndGeometry: n must be >= 1");
    if (m < 0 || static_cast<int>(torus_circumferences.size()) != m) {
      throw DomainError("EndGeometry: need exactly m torus circumferences");
    }
    for (Scalar L : torus_circumferences) {
      if (!(L > 0)) throw DomainError("EndGeometry: circumferences must be positive");
    }
  }
};

template <typename Scalar = double>
struct KernelPoint {
  Scalar euclid_sep = 0;
  std::vector<Scalar> torus_seps;

  Scalar geodesic_dist() const {
    Scalar s = euclid_sep * euclid_sep;
    for (Scalar t : torus_seps) s += t * t;
    return std::sqrt(s);
  }
};

namespace detail {

template <typename Scalar>
void validate_point(const EndGeometry<Scalar>& geom, const KernelPoint<Scalar>& pt) {
  if (!(pt.euclid_sep >= 0)) throw DomainError("KernelPoint: euclid_sep must be >= 0");
  if (static_cast<int>(pt.torus_seps.size()) != geom.m) {
    throw DomainError("KernelPoint: need one torus separation per torus factor");
  }
  for (int i = 0; i < geom.m; ++i) {
    const Scalar t = pt.torus_seps[i];
    if (!(t >= 0) || t > geom.torus_circumferences[i] / 2) {
      throw DomainError("KernelPoint: torus separations must lie in [0, L/2]");
    }
  }
}

template <typename Scalar>
QuadratureOptions<Scalar> kernel_quadrature() {
  QuadratureOptions<Scalar> opt;
  opt.initial_points = 64;
  opt.rel_tol = Scalar(1e-13);
  return opt;
}

}  // namespace detail

/// log of the free R^N kernel of (Delta + k^2)^{-j} at distance rho, and log
/// of |d/drho| of it. At rho = 0 (allowed only for 2j > N) the slope is zero
/// and its log is -inf.
template <typename Scalar = double>
struct FreeKernelLog {
  Scalar log_value;
  Scalar log_slope;
};

template <typename Scalar = double>
FreeKernelLog<Scalar> free_resolvent_log(int N, int j, Scalar k, Scalar rho, bool with_slope = true) {
  if (!(k > 0)) throw DomainError("free_resolvent: k must be positive");
  if (j < 1) throw DomainError("free_resolvent: j must be >= 1");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar half_n = Scalar(N) / 2;
  const Scalar log_pref = -half_n * std::log(4 * pi) - std::lgamma(Scalar(j));
  if (rho == 0) {
    if (2 * j <= N) throw DomainError("end_resolvent: on-diagonal kernel is singular for 2j <= N");
    const Scalar v = log_pref + std::lgamma(Scalar(j) - half_n) + (N - 2 * j) * std::log(k);
    return {v, -std::numeric_limits<Scalar>::infinity()};
  }
  const Scalar s = k * rho;
  const Scalar log_t_star = std::log(rho / (2 * k));
  const Scalar beta = half_n - Scalar(j);
  const auto opt = detail::kernel_quadrature<Scalar>();
  const Scalar common = log_pref + (Scalar(j) - half_n) * log_t_star - s;
  FreeKernelLog<Scalar> out;
  out.log_value = common + std::log(saddle_integral<Scalar>(s, beta, opt));
  out.log_slope = with_slope ? common + std::log(k) + std::log(saddle_integral<Scalar>(s, beta + 1, opt))
                             : -std::numeric_limits<Scalar>::infinity();
  return out;
}

/// Kernel value and gradient of (Delta + k^2)^{-j} on R^n x T^m.
template <typename Scalar = double>
struct EndKernelValue {
  Scalar value = 0;
  Scalar grad_euclid = 0;           // d/d(euclid_sep), signed
  Scalar grad_norm = 0;             // full Euclidean + torus gradient magnitude
  int shells = 0;
};

/// Torus image sum, shell by shell in the max-norm of the lattice index, until
/// a shell adds less than 1e-12 of the running totals (hard cap |nu| <= 64).
template <typename Scalar = double>
EndKernelValue<Scalar> end_kernel(const EndGeometry<Scalar>& geom, int j, Scalar k,
                                  const KernelPoint<Scalar>& pt, bool with_gradient = true) {
  geom.validate();
  detail::validate_point(geom, pt);
  if (!(k > 0)) throw DomainError("end_resolvent: k must be positive");
  if (j < 1) throw DomainError("end_resolvent: j must be >= 1");
  const int N = geom.N();
  const int m = geom.m;
  constexpr int max_shell = 64;
  constexpr Scalar shell_tol = Scalar(1e-12);

  Scalar ref = std::numeric_limits<Scalar>::quiet_NaN();  // log scale of the nu = 0 term
  Scalar value = 0, grad_e = 0, grad_abs = 0;
  std::vector<Scalar> grad_t(m, Scalar(0));
  std::vector<int> nu(m, 0);
  std::vector<Scalar> offs(m);

  EndKernelValue<Scalar> out;
  for (int shell = 0; shell <= max_shell; ++shell) {
    Scalar shell_value = 0, shell_abs = 0;
    // Enumerate the cube [-shell, shell]^m, keeping the boundary only.
    const int side = 2 * shell + 1;
    long long count = 1;
    for (int i = 0; i < m; ++i) count *= side;
    for (long long idx = 0; idx < count; ++idx) {
      long long rest = idx;
      int maxabs = 0;
      for (int i = 0; i < m; ++i) {
        nu[i] = static_cast<int>(rest % side) - shell;
        rest /= side;
        maxabs = std::max(maxabs, std::abs(nu[i]));
      }
      if (maxabs != shell) continue;
      Scalar rho2 = pt.euclid_sep * pt.euclid_sep;
      for (int i = 0; i < m; ++i) {
        offs[i] = pt.torus_seps[i] + Scalar(nu[i]) * geom.torus_circumferences[i];
        rho2 += offs[i] * offs[i];
      }
      const Scalar rho = std::sqrt(rho2);
      const auto lk = free_resolvent_log<Scalar>(N, j, k, rho, with_gradient);
      if (std::isnan(ref)) ref = lk.log_value;
      const Scalar v = std::exp(lk.log_value - ref);
      shell_value += v;
      value += v;
      if (with_gradient && rho > 0) {
        const Scalar slope = std::exp(lk.log_slope - ref);  // |dK/drho|
        grad_e -= slope * pt.euclid_sep / rho;
        for (int i = 0; i < m; ++i) grad_t[i] -= slope * offs[i] / rho;
        shell_abs += slope;
        grad_abs += slope;
      }
    }
    out.shells = shell;
    if (m == 0) break;
    if (shell >= 1 && shell_value < shell_tol * value && shell_abs <= shell_tol * grad_abs) break;
    if (shell == max_shell) {
      throw ConvergenceError("end_resolvent: torus image sum not converged within |nu| <= 64 (k = " +
                             std::to_string(double(k)) + ")");
    }
  }
  const Scalar scale = std::exp(ref);
  out.value = value * scale;
  out.grad_euclid = grad_e * scale;
  Scalar g2 = grad_e * grad_e;
  for (Scalar g : grad_t) g2 += g * g;
  out.grad_norm = std::sqrt(g2) * scale;
  return out;
}

/// Kernel of (Delta_{R^n x T^m} + k^2)^{-j} at separation pt.
template <typename Scalar = double>
Scalar end_resolvent(const EndGeometry<Scalar>& geom, int j, Scalar k, const KernelPoint<Scalar>& pt) {
  return end_kernel(geom, j, k, pt, false).value;
}

/// |d/d(euclid_sep)| of the kernel.
template <typename Scalar = double>
Scalar end_resolvent_grad(const EndGeometry<Scalar>& geom, int j, Scalar k, const KernelPoint<Scalar>& pt) {
  return std::abs(end_kernel(geom, j, k, pt, true).grad_euclid);
}

/// Magnitude of the full gradient (Euclidean and torus directions).
template <typename Scalar = double>
Scalar end_resolvent_grad_norm(const EndGeometry<Scalar>& geom, int j, Scalar k,
                               const KernelPoint<Scalar>& pt) {
  return end_kernel(geom, j, k, pt, true).grad_norm;
}

// ---------------------------------------------------------------------------
// Envelope checks

enum class BoundId {
  resolvent_upper,        // k^{n-2j} G^n_{2j}(c k d) + k^{N-2j} G^N_{2j}(c k d), upper
  resolvent_lower,        // same envelope, lower
  gradient_upper,         // k^{n+1-2j} G^n_{2j-1}(c k d) + k^{N+1-2j} G^N_{2j-1}(c k d)
  resolvent_corner,       // low-energy power/log envelopes, case chosen from (j, n, N)
  gradient_corner,        // same with 2j replaced by 2j - 1
  resolvent_uniform,      // k^{-2(j-1)} (d^{2-N} + d^{2-n}) e^{-ckd}
  gradient_uniform,       // k^{-2(j-1)} (d^{1-N} + d^{1-n}) e^{-ckd}
  resolvent_lower_power,  // (d^{2j-N} + d^{2j-n}) e^{-ckd}, lower, j < n/2
};

inline const std::vector<std::pair<BoundId, std::string>>& bound_id_names() {
  static const std::vector<std::pair<BoundId, std::string>> names = {
      {BoundId::resolvent_upper, "resolvent-upper"},
      {BoundId::resolvent_lower, "resolvent-lower"},
      {BoundId::gradient_upper, "gradient-upper"},
      {BoundId::resolvent_corner, "resolvent-corner"},
      {BoundId::gradient_corner, "gradient-corner"},
      {BoundId::resolvent_uniform, "resolvent-uniform"},
      {BoundId::gradient_uniform, "gradient-uniform"},
      {BoundId::resolvent_lower_power, "resolvent-lower-power"},
  };
  return names;
}

inline std::string to_string(BoundId id) {
  for (const auto& [b, name] : bound_id_names()) {
    if (b == id) return name;
  }
  return "?";
}

inline BoundId parse_bound_id(const std::string& s) {
  for (const auto& [b, name] : bound_id_names()) {
    if (name == s) return b;
  }
  throw DomainError("unknown bound id '" + s + "'");
}

inline bool is_lower_bound(BoundId id) {
  return id == BoundId::resolvent_lower || id == BoundId::resolvent_lower_power;
}

inline bool is_gradient_bound(BoundId id) {
  return id == BoundId::gradient_upper || id == BoundId::gradient_corner ||
         id == BoundId::gradient_uniform;
}

template <typename Scalar = double>
struct BoundReport {
  BoundId bound_id = BoundId::resolvent_upper;
  std::string envelope_case;  // which corner case was applied, if any
  Scalar fitted_constant = 0;
  Scalar fitted_rate = 0;
  bool pass = false;
  bool small_scale_consistent = true;
  KernelPoint<Scalar> worst_point;
  Scalar worst_k = 0;
  std::size_t samples = 0;
};

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(Scalar a, Scalar b) {
  if (a == -std::numeric_limits<Scalar>::infinity()) return b;
  if (b == -std::numeric_limits<Scalar>::infinity()) return a;
  const Scalar hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

template <typename Scalar>
Scalar log_max1_log(Scalar x) {  // log max(1, ln(1/x))
  return std::log(std::max(Scalar(1), -std::log(x)));
}

/// Corner envelope for order q = 2j (kernel) or 2j - 1 (gradient), without
/// the exponential factor. Returns log value; `label` receives the case.
template <typename Scalar>
Scalar log_corner_envelope(int q, int n, int N, Scalar k, Scalar d, std::string* label) {
  auto power_term = [&](int dim) {
    const int e = q - dim;
    return Scalar(std::min(e, 0)) * std::log(d) - Scalar(std::max(e, 0)) * std::log(k);
  };
  const Scalar lg = log_max1_log(k * d);
  const bool single = (N == n);
  if (q != n && q != N) {
    if (label) *label = "power";
    return single ? power_term(n) : log_sum_exp(power_term(N), power_term(n));
  }
  if (q == n && q < N) {
    if (label) *label = "log-low-dimension";
    return log_sum_exp(Scalar(q - N) * std::log(d), lg);
  }
  if (q == n && q == N) {
    if (label) *label = "log-equal";
    return lg;
  }
  // n < q = N
  if (label) *label = "log-total-dimension";
  return log_sum_exp(lg, Scalar(n - q) * std::log(k));
}

}  // namespace detail

/// log of the selected envelope at (k, d) and rate c.
template <typename Scalar = double>
Scalar log_bound_envelope(BoundId id, const EndGeometry<Scalar>& geom, int j, Scalar k, Scalar d, Scalar c,
                          std::string* label = nullptr) {
  const int n = geom.n, N = geom.N();
  const bool single = (N == n);
  auto bessel_term = [&](int dim, int order) {
    // k^{dim - order} G^{dim}_{order}(c k d); the rate is floored so that the
    // argument stays positive during the rate search.
    BesselSpec<Scalar> spec;
    spec.a = Scalar(order);
    spec.d = Scalar(dim);
    const Scalar s = std::max(c, Scalar(1e-3)) * k * d;
    return Scalar(dim - order) * std::log(k) + bessel_log_eval(spec, s);
  };
  switch (id) {
    case BoundId::resolvent_upper:
    case BoundId::resolvent_lower:
      return single ? bessel_term(n, 2 * j) : detail::log_sum_exp(bessel_term(n, 2 * j), bessel_term(N, 2 * j));
    case BoundId::gradient_upper:
      return single ? bessel_term(n, 2 * j - 1)
                    : detail::log_sum_exp(bessel_term(n, 2 * j - 1), bessel_term(N, 2 * j - 1));
    case BoundId::resolvent_corner:
      return detail::log_corner_envelope(2 * j, n, N, k, d, label) - c * k * d;
    case BoundId::gradient_corner:
      return detail::log_corner_envelope(2 * j - 1, n, N, k, d, label) - c * k * d;
    case BoundId::resolvent_uniform:
    case BoundId::gradient_uniform: {
      const int shift = id == BoundId::resolvent_uniform ? 2 : 1;
      const Scalar a = Scalar(shift - N) * std::log(d);
      const Scalar b = Scalar(shift - n) * std::log(d);
      return -Scalar(2 * (j - 1)) * std::log(k) + (single ? b : detail::log_sum_exp(a, b)) - c * k * d;
    }
    case BoundId::resolvent_lower_power: {
      const Scalar a = Scalar(2 * j - N) * std::log(d);
      const Scalar b = Scalar(2 * j - n) * std::log(d);
      return (single ? b : detail::log_sum_exp(a, b)) - c * k * d;
    }
  }
  return 0;
}

/// Fits the rate and constant of the selected envelope over the product grid
/// k_grid x pt_grid. A theorem violation shows up as pass = false (no decaying
/// rate, or a kernel/envelope ratio that degenerates toward the diagonal).
template <typename Scalar = double>
BoundReport<Scalar> check_bounds(const EndGeometry<Scalar>& geom, int j, BoundId id,
                                 const std::vector<Scalar>& k_grid,
                                 const std::vector<KernelPoint<Scalar>>& pt_grid) {
  geom.validate();
  if (k_grid.empty() || pt_grid.empty()) throw DomainError("check_bounds: empty grid");
  if (j < 1) throw DomainError("check_bounds: j must be >= 1");
  const bool corner = id == BoundId::resolvent_corner || id == BoundId::gradient_corner;
  if (corner || id == BoundId::resolvent_lower_power) {
    for (Scalar k : k_grid) {
      if (!(k > 0) || k > 1) throw DomainError("check_bounds: low-energy bounds need k in (0, 1]");
    }
  }
  if (id == BoundId::resolvent_lower_power && !(2 * j < geom.n)) {
    throw DomainError("check_bounds: the power lower bound needs j < n/2");
  }
  for (const auto& pt : pt_grid) {
    if (!(pt.geodesic_dist() > 0)) throw DomainError("check_bounds: points must be off the diagonal");
  }

  const bool gradient = is_gradient_bound(id);
  const bool lower = is_lower_bound(id);
  const std::size_t P = pt_grid.size();
  std::vector<Scalar> log_kernel(k_grid.size() * P), x(k_grid.size() * P), dist(P);
  for (std::size_t p = 0; p < P; ++p) dist[p] = pt_grid[p].geodesic_dist();
  for (std::size_t ik = 0; ik < k_grid.size(); ++ik) {
    for (std::size_t p = 0; p < P; ++p) {
      const auto kv = end_kernel(geom, j, k_grid[ik], pt_grid[p], gradient);
      const Scalar v = gradient ? kv.grad_norm : kv.value;
      log_kernel[ik * P + p] = std::log(v);
      x[ik * P + p] = k_grid[ik] * dist[p];
    }
  }

  BoundReport<Scalar> report;
  report.bound_id = id;
  report.samples = x.size();
  log_bound_envelope(id, geom, j, k_grid.front(), dist.front(), Scalar(1), &report.envelope_case);

  SandwichProblem<Scalar> problem;
  problem.x = x;
  problem.log_ratio = [&](std::size_t i, Scalar c) {
    const std::size_t ik = i / P, p = i % P;
    return log_kernel[i] - log_bound_envelope(id, geom, j, k_grid[ik], dist[p], c);
  };
  const SandwichFit<Scalar> sw = fit_sandwich(problem);
  const Scalar rate = lower ? sw.c_lower : sw.c_upper;
  const Scalar log_C = lower ? sw.log_C_lower : sw.log_C_upper;
  const std::size_t worst = lower ? sw.worst_lower : sw.worst_upper;
  report.fitted_rate = rate;
  report.fitted_constant = rate >= 0 ? std::exp(log_C) : Scalar(0);
  report.worst_point = pt_grid[worst % P];
  report.worst_k = k_grid[worst / P];

  // Near-diagonal consistency: the log-ratio slope against log d between the
  // two closest distances must stay within +-1/2 (pure power mismatch shows up
  // as a slope of at least one).
  if (rate >= 0) {
    std::vector<std::size_t> order(P);
    for (std::size_t p = 0; p < P; ++p) order[p] = p;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return dist[a] < dist[b]; });
    std::size_t p1 = order[0], p2 = order[0];
    for (std::size_t idx = 1; idx < P; ++idx) {
      if (dist[order[idx]] > dist[p1] * (1 + Scalar(1e-9))) {
        p2 = order[idx];
        break;
      }
    }
    if (p2 != p1) {
      for (std::size_t ik = 0; ik < k_grid.size(); ++ik) {
        if (k_grid[ik] * dist[p2] > Scalar(0.1)) continue;
        const Scalar slope = (problem.log_ratio(ik * P + p1, rate) - problem.log_ratio(ik * P + p2, rate)) /
                             std::log(dist[p2] / dist[p1]);
        if (lower ? slope < Scalar(-0.5) : slope > Scalar(0.5)) report.small_scale_consistent = false;
      }
    }
  }
  report.pass = rate > Scalar(1e-6) && std::isfinite(report.fitted_constant) && report.fitted_constant > 0 &&
                report.small_scale_consistent;
  return report;
}

}  // namespace ends_sqfn
