#pragma once

// Weight functions on the ends and Schur-test finiteness scans for the
// kernel-envelope families of the low-energy square functions.
//
// Geometry: the compact core is a single point of measure 1 (distance 0);
// end i is r in [1, R] with measure r^{n_i - 1} dr. <r> = sqrt(1 + r^2).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ends_sqfn/errors.hpp"
#include "ends_sqfn/fitting.hpp"
#include "ends_sqfn/quadrature.hpp"

namespace ends_sqfn {

template <typename Scalar>
Scalar japanese(Scalar d) {
  return std::sqrt(1 + d * d);
}

/// omega_a^c: 1 on the core, <d>^{-(n_i - a)} e^{-c k d} on end i.
template <typename Scalar = double>
struct WeightProfile {
  int a = 0;
  Scalar c = 1;
  std::vector<int> n;  // per-end dimensions
};

/// `end` < 0 selects the core.
template <typename Scalar = double>
Scalar eval_weight(const WeightProfile<Scalar>& w, int end, Scalar d, Scalar k) {
  if (!(d >= 0) || !(k >= 0) || !(k <= 1)) throw DomainError("eval_weight: need d >= 0 and k in [0, 1]");
  if (!(w.c > 0) || w.a < 0) throw DomainError("eval_weight: need a >= 0 and c > 0");
  if (end < 0) return Scalar(1);
  if (end >= static_cast<int>(w.n.size())) throw DomainError("eval_weight: end index out of range");
  return std::pow(japanese(d), -Scalar(w.n[end] - w.a)) * std::exp(-w.c * k * d);
}

enum class Combiner { product, min_of_two };

/// <dx>^{x_exponent} <dy>^{y_exponent}, or the smaller of two such products.
/// k_exponent and rate describe the pre-integration form
/// k^{k_exponent} e^{-rate k (dx + dy)} times the same powers.
template <typename Scalar = double>
struct KernelEnvelope {
  Scalar x_exponent = 0;
  Scalar y_exponent = 0;
  Scalar k_exponent = 0;
  Scalar rate = 1;
  Combiner combiner = Combiner::product;
  Scalar x_exponent2 = 0;
  Scalar y_exponent2 = 0;

  Scalar log_eval(Scalar dx, Scalar dy) const {
    const Scalar lx = std::log(japanese(dx)), ly = std::log(japanese(dy));
    const Scalar first = x_exponent * lx + y_exponent * ly;
    if (combiner == Combiner::product) return first;
    return std::min(first, x_exponent2 * lx + y_exponent2 * ly);
  }
  Scalar eval(Scalar dx, Scalar dy) const { return std::exp(log_eval(dx, dy)); }
  Scalar eval_k(Scalar dx, Scalar dy, Scalar k) const {
    return std::pow(k, k_exponent) * std::exp(-rate * k * (dx + dy)) * eval(dx, dy);
  }
};

enum class IntegralId { KC1, KC2, KC3, KC4_I1, KC4_I2, J1, J2 };

inline const char* to_string(IntegralId id) {
  switch (id) {
    case IntegralId::KC1: return "KC1";
    case IntegralId::KC2: return "KC2";
    case IntegralId::KC3: return "KC3";
    case IntegralId::KC4_I1: return "KC4-I1";
    case IntegralId::KC4_I2: return "KC4-I2";
    case IntegralId::J1: return "J1";
    case IntegralId::J2: return "J2";
  }
  return "?";
}

inline IntegralId parse_integral_id(const std::string& s) {
  for (auto id : {IntegralId::KC1, IntegralId::KC2, IntegralId::KC3, IntegralId::KC4_I1, IntegralId::KC4_I2,
                  IntegralId::J1, IntegralId::J2}) {
    if (s == to_string(id)) return id;
  }
  throw DomainError("unknown integral id '" + s + "'");
}

enum class EnvelopeFamily { h3, w1 };

inline const char* to_string(EnvelopeFamily f) { return f == EnvelopeFamily::h3 ? "h3" : "w1"; }

inline EnvelopeFamily parse_envelope_family(const std::string& s) {
  if (s == "h3") return EnvelopeFamily::h3;
  if (s == "w1") return EnvelopeFamily::w1;
  throw DomainError("unknown envelope family '" + s + "'");
}

/// Integrals belonging to a family: h3 uses KC1..KC4 (split I1/I2), w1 the
/// same KC1..KC3 and its own split J1/J2.
inline std::vector<IntegralId> family_integrals(EnvelopeFamily f) {
  if (f == EnvelopeFamily::h3) {
    return {IntegralId::KC1, IntegralId::KC2, IntegralId::KC3, IntegralId::KC4_I1, IntegralId::KC4_I2};
  }
  return {IntegralId::KC1, IntegralId::KC2, IntegralId::KC3, IntegralId::J1, IntegralId::J2};
}

/// k-integrated envelope of `family` on the region of integral `id`.
template <typename Scalar = double>
KernelEnvelope<Scalar> family_envelope(EnvelopeFamily family, IntegralId id, int n_i, int n_j) {
  KernelEnvelope<Scalar> e;
  const bool h3 = family == EnvelopeFamily::h3;
  e.k_exponent = h3 ? 1 : 3;  // k^{4M-3} |k^{2-2M}|^2 and k^{4M-5} |k^{4-2M}|^2
  switch (id) {
    case IntegralId::KC1: break;
    case IntegralId::KC2: e.x_exponent = -n_i; break;
    case IntegralId::KC3: e.y_exponent = h3 ? 1 - n_j : -n_j; break;
    case IntegralId::KC4_I1:
      e.x_exponent = 1 - n_i;
      e.y_exponent = 1 - n_j;
      break;
    case IntegralId::J1:
      e.x_exponent = 2 - n_i;
      e.y_exponent = -n_j;
      break;
    case IntegralId::KC4_I2:
    case IntegralId::J2:
      e.x_exponent = -n_i;
      e.y_exponent = 2 - n_j;
      break;
  }
  return e;
}

/// Threshold the theory predicts for an integral (none when finite for all p > 1).
inline std::optional<double> predicted_cutoff(EnvelopeFamily family, IntegralId id, int n_j) {
  if (family == EnvelopeFamily::h3 && (id == IntegralId::KC3 || id == IntegralId::KC4_I1)) return double(n_j);
  return std::nullopt;
}

template <typename Scalar = double>
struct ThresholdVerdict {
  Scalar p = 0;
  bool finite = true;
  bool inconclusive = false;
  // Governing tail exponent (max of the inner-integrand and outer-integrand
  // exponents that apply); -inf when both domains are compact.
  Scalar exponent = -std::numeric_limits<Scalar>::infinity();
  Scalar inner_exponent = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar outer_exponent = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar value = 0;  // truncated integral (inf when the inner integral diverges)
};

template <typename Scalar = double>
struct ThresholdReport {
  IntegralId integral_id = IntegralId::KC1;
  int n_i = 0, n_j = 0;
  Scalar r_outer = 0;
  Scalar tol_exp = Scalar(0.02);
  std::vector<Scalar> p_grid;
  std::vector<ThresholdVerdict<Scalar>> verdicts;
  std::optional<Scalar> predicted_cutoff;
  std::optional<Scalar> detected_cutoff;
};

template <typename Scalar = double>
struct ScanOptions {
  int points_per_decade = 64;
  Scalar tol_exp = Scalar(0.02);
  Scalar fit_decades = 2;
  Scalar cutoff_tol = Scalar(1e-4);
};

namespace detail {

template <typename Scalar>
Scalar log_add(Scalar a, Scalar b) {
  if (a == -std::numeric_limits<Scalar>::infinity()) return b;
  if (b == -std::numeric_limits<Scalar>::infinity()) return a;
  const Scalar m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

enum class Region { core, end };

struct Layout {
  Region x, y;
  int y_domain;  // 0 whole end, 1 = {d_y >= d_x}, 2 = {d_y < d_x}
};

inline Layout layout_of(IntegralId id) {
  switch (id) {
    case IntegralId::KC1: return {Region::core, Region::core, 0};
    case IntegralId::KC2: return {Region::end, Region::core, 0};
    case IntegralId::KC3: return {Region::core, Region::end, 0};
    case IntegralId::KC4_I1:
    case IntegralId::J1: return {Region::end, Region::end, 1};
    case IntegralId::KC4_I2:
    case IntegralId::J2: return {Region::end, Region::end, 2};
  }
  return {Region::core, Region::core, 0};
}

template <typename Scalar>
Scalar tail_slope(const std::vector<Scalar>& u, const std::vector<Scalar>& logv, Scalar u_from) {
  std::vector<Scalar> xs, ys;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] >= u_from && std::isfinite(logv[i])) {
      xs.push_back(u[i]);
      ys.push_back(logv[i]);
    }
  }
  return fit_line<Scalar>(xs, ys).slope;
}

}  // namespace detail

/// One Schur-type integral int_X (int_Y env^{p'} dmu_j)^{p/p'} dmu_i at a single p.
template <typename Scalar = double>
ThresholdVerdict<Scalar> schur_integral(const KernelEnvelope<Scalar>& env, IntegralId id, int n_i, int n_j, Scalar p,
                                        Scalar r_outer, const ScanOptions<Scalar>& opt = {}) {
  using detail::log_add;
  constexpr Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
  const auto lay = detail::layout_of(id);
  const Scalar pp = p / (p - 1);
  const Scalar ratio = p / pp;  // p/p' = p - 1

  const int count = static_cast<int>(std::lround(opt.points_per_decade * std::log10(r_outer)));
  const Scalar du = std::log(r_outer) / Scalar(count);
  std::vector<Scalar> u(count + 1), r(count + 1);
  for (int m = 0; m <= count; ++m) {
    u[m] = du * Scalar(m);
    r[m] = std::exp(u[m]);
  }
  const Scalar fit_from = std::log(r_outer) - opt.fit_decades * std::log(Scalar(10));

  ThresholdVerdict<Scalar> v;
  v.p = p;

  // Log of the inner integrand density in u = ln y (measure y^{n_j} du).
  auto log_g = [&](Scalar dx, Scalar y) { return pp * env.log_eval(dx, y) + Scalar(n_j) * std::log(y); };

  // Inner integral at distance dx (0 for the core); inner_exponent governs the
  // analytic continuation beyond r_outer when the y-domain is unbounded.
  auto log_inner = [&](Scalar dx, std::size_t x_index) -> Scalar {
    if (lay.y == detail::Region::core) return pp * env.log_eval(dx, Scalar(0));
    std::size_t lo = 0, hi = r.size() - 1;
    if (lay.y_domain == 1) lo = x_index;
    if (lay.y_domain == 2) hi = x_index;
    Scalar acc = neg_inf;
    if (hi > lo) {
      for (std::size_t m = lo; m <= hi; ++m) {
        const Scalar w = (m == lo || m == hi) ? du / 2 : du;
        acc = log_add(acc, std::log(w) + log_g(dx, r[m]));
      }
    }
    if (lay.y_domain != 2) {
      const Scalar a = v.inner_exponent;  // exponent of the density in dy: g ~ y^a, a = slope - 1
      acc = log_add(acc, log_g(dx, r.back()) - std::log(-a - 1));
    }
    return acc;
  };

  if (lay.y == detail::Region::end && lay.y_domain != 2) {
    std::vector<Scalar> lg(r.size());
    for (std::size_t m = 0; m < r.size(); ++m) lg[m] = log_g(Scalar(lay.x == detail::Region::core ? 0 : 1), r[m]);
    v.inner_exponent = detail::tail_slope(u, lg, fit_from) - 1;
    if (v.inner_exponent >= -1) {
      v.exponent = v.inner_exponent;
      v.finite = false;
      v.inconclusive = std::abs(v.exponent + 1) < opt.tol_exp;
      v.value = std::numeric_limits<Scalar>::infinity();
      return v;
    }
  }

  if (lay.x == detail::Region::core) {
    v.value = std::exp(ratio * log_inner(Scalar(0), 0));
  } else {
    std::vector<Scalar> lh(r.size());
    Scalar acc = neg_inf;
    for (std::size_t m = 0; m < r.size(); ++m) {
      lh[m] = ratio * log_inner(r[m], m) + Scalar(n_i) * std::log(r[m]);
      const Scalar w = (m == 0 || m + 1 == r.size()) ? du / 2 : du;
      acc = log_add(acc, std::log(w) + lh[m]);
    }
    v.outer_exponent = detail::tail_slope(u, lh, fit_from) - 1;
    v.value = std::exp(acc);
  }

  if (std::isfinite(v.inner_exponent)) v.exponent = v.inner_exponent;
  if (std::isfinite(v.outer_exponent)) v.exponent = std::isfinite(v.exponent) ? std::max(v.exponent, v.outer_exponent)
                                                                              : v.outer_exponent;
  if (std::isfinite(v.exponent)) {
    v.finite = v.exponent < -1 - opt.tol_exp;
    v.inconclusive = std::abs(v.exponent + 1) < opt.tol_exp;
  }
  return v;
}

/// Verdicts over `p_grid` and the cutoff p* (bisection on the sign of
/// exponent + 1 between the first finite/divergent pair of grid points).
template <typename Scalar = double>
ThresholdReport<Scalar> threshold_scan(const KernelEnvelope<Scalar>& env, IntegralId id, int n_i, int n_j,
                                       const std::vector<Scalar>& p_grid, Scalar r_outer,
                                       const ScanOptions<Scalar>& opt = {}) {
  if (p_grid.empty()) throw DomainError("threshold_scan: empty p grid");
  for (Scalar p : p_grid) {
    if (!(p > 1) || !(p <= 20)) throw DomainError("threshold_scan: p must lie in (1, 20]");
  }
  if (!(r_outer >= Scalar(1e6))) throw DomainError("threshold_scan: R_outer must be >= 1e6");
  if (n_i < 3 || n_j < 3) throw DomainError("threshold_scan: end dimensions must be >= 3");

  ThresholdReport<Scalar> rep;
  rep.integral_id = id;
  rep.n_i = n_i;
  rep.n_j = n_j;
  rep.r_outer = r_outer;
  rep.tol_exp = opt.tol_exp;
  rep.p_grid = p_grid;
  std::sort(rep.p_grid.begin(), rep.p_grid.end());
  for (Scalar p : rep.p_grid) rep.verdicts.push_back(schur_integral(env, id, n_i, n_j, p, r_outer, opt));

  auto below = [&](Scalar p) { return schur_integral(env, id, n_i, n_j, p, r_outer, opt).exponent < -1; };
  for (std::size_t i = 0; i + 1 < rep.verdicts.size(); ++i) {
    if (rep.verdicts[i].exponent < -1 && !(rep.verdicts[i + 1].exponent < -1)) {
      Scalar lo = rep.verdicts[i].p, hi = rep.verdicts[i + 1].p;
      while (hi - lo > opt.cutoff_tol) {
        const Scalar mid = (lo + hi) / 2;
        (below(mid) ? lo : hi) = mid;
      }
      rep.detected_cutoff = (lo + hi) / 2;
      break;
    }
  }
  return rep;
}

template <typename Scalar = double>
ThresholdReport<Scalar> threshold_scan(EnvelopeFamily family, IntegralId id, int n_i, int n_j,
                                       const std::vector<Scalar>& p_grid, Scalar r_outer,
                                       const ScanOptions<Scalar>& opt = {}) {
  auto rep = threshold_scan(family_envelope<Scalar>(family, id, n_i, n_j), id, n_i, n_j, p_grid, r_outer, opt);
  if (auto pc = predicted_cutoff(family, id, n_j)) rep.predicted_cutoff = Scalar(*pc);
  return rep;
}

template <typename Scalar = double>
struct EtaFit {
  int M = 1;
  Scalar kappa = 0;  // largest kappa with eta(d) >= kappa d^{-(4M-2)} on the grid
  std::vector<Scalar> d_grid;
  std::vector<Scalar> eta;
};

/// eta(d) = int_0^1 k^{4M-3} e^{-k d} dk by Gauss-Legendre panels.
template <typename Scalar = double>
Scalar eta_integral(int M, Scalar d) {
  static const GaussLegendre<Scalar> gl(32);
  const int panels = 8 + static_cast<int>(std::ceil(d / 4));
  return gl.integrate([&](Scalar k) { return std::pow(k, Scalar(4 * M - 3)) * std::exp(-k * d); }, Scalar(0),
                      Scalar(1), std::min(panels, 4096));
}

template <typename Scalar = double>
EtaFit<Scalar> eta_lower_bound(int M, const std::vector<Scalar>& d_grid) {
  if (M < 1) throw DomainError("eta_lower_bound: M must be >= 1");
  if (d_grid.empty()) throw DomainError("eta_lower_bound: empty grid");
  EtaFit<Scalar> fit;
  fit.M = M;
  fit.d_grid = d_grid;
  fit.kappa = std::numeric_limits<Scalar>::infinity();
  for (Scalar d : d_grid) {
    if (!(d >= 2) || !(d <= Scalar(1e4))) throw DomainError("eta_lower_bound: d must lie in [2, 1e4]");
    const Scalar e = eta_integral(M, d);
    fit.eta.push_back(e);
    fit.kappa = std::min(fit.kappa, e * std::pow(d, Scalar(4 * M - 2)));
  }
  return fit;
}

}  // namespace ends_sqfn
