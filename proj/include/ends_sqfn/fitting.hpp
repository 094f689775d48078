#pragma once

// Small regression and rate-fitting helpers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ends_sqfn/errors.hpp"

namespace ends_sqfn {

template <typename Scalar = double>
struct LineFit {
  Scalar slope = 0;
  Scalar intercept = 0;
  Scalar slope_stderr = 0;
  Scalar max_abs_residual = 0;
};

/// Ordinary least squares y ~ intercept + slope * x.
template <typename Scalar = double>
LineFit<Scalar> fit_line(std::span<const Scalar> x, std::span<const Scalar> y) {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 2 || x.size() != y.size()) throw DomainError("fit_line: need >= 2 paired samples");
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Mat design(n, 2);
  Vec rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1;
    design(i, 1) = x[i];
    rhs(i) = y[i];
  }
  const Eigen::Matrix<Scalar, 2, 1> coef = design.colPivHouseholderQr().solve(rhs);
  const Vec resid = rhs - design * coef;
  LineFit<Scalar> fit;
  fit.intercept = coef(0);
  fit.slope = coef(1);
  fit.max_abs_residual = resid.cwiseAbs().maxCoeff();
  if (n > 2) {
    const Scalar sigma2 = resid.squaredNorm() / Scalar(n - 2);
    const Scalar xbar = design.col(1).mean();
    const Scalar sxx = (design.col(1).array() - xbar).square().sum();
    fit.slope_stderr = sxx > 0 ? std::sqrt(sigma2 / sxx) : Scalar(0);
  }
  return fit;
}

namespace detail {

// Coarse rate lattice {0} U [1e-3, c_max] (log-spaced), ascending.
template <typename Scalar>
std::vector<Scalar> rate_lattice(Scalar c_max) {
  std::vector<Scalar> out{Scalar(0)};
  constexpr int count = 96;
  const Scalar lo = Scalar(1e-3);
  for (int i = 0; i < count; ++i) out.push_back(lo * std::pow(c_max / lo, Scalar(i) / Scalar(count - 1)));
  return out;
}

}  // namespace detail

/// Largest c in [0, c_max] satisfying `admissible`. The predicate need not be
/// monotone: a coarse scan from c_max downward finds the largest admissible
/// lattice rate, then bisection refines toward the next (failing) lattice
/// rate to `tol`. Returns -1 when no lattice rate is admissible.
template <typename Scalar = double>
Scalar largest_admissible(const std::function<bool(Scalar)>& admissible, Scalar c_max,
                          Scalar tol = Scalar(1e-6)) {
  const auto lattice = detail::rate_lattice(c_max);
  for (std::size_t i = lattice.size(); i-- > 0;) {
    if (!admissible(lattice[i])) continue;
    if (i + 1 == lattice.size()) return lattice[i];
    Scalar lo = lattice[i], hi = lattice[i + 1];
    while (hi - lo > tol) {
      const Scalar mid = (lo + hi) / 2;
      (admissible(mid) ? lo : hi) = mid;
    }
    return lo;
  }
  return Scalar(-1);
}

/// Smallest c in [0, c_max] satisfying `admissible` (mirror image of
/// largest_admissible). Returns -1 when no lattice rate is admissible.
template <typename Scalar = double>
Scalar smallest_admissible(const std::function<bool(Scalar)>& admissible, Scalar c_max,
                           Scalar tol = Scalar(1e-6)) {
  const auto lattice = detail::rate_lattice(c_max);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (!admissible(lattice[i])) continue;
    if (i == 0) return lattice[i];
    Scalar lo = lattice[i - 1], hi = lattice[i];
    while (hi - lo > tol) {
      const Scalar mid = (lo + hi) / 2;
      (admissible(mid) ? hi : lo) = mid;
    }
    return hi;
  }
  return Scalar(-1);
}

/// Envelope sandwich over samples indexed by a scale variable x (x = s, or
/// x = k d). `log_ratio(i, c)` is log(value_i / envelope_i(c)).
///
/// An upper rate c is admissible when the largest ratio over the far half of
/// the samples (x above the median) does not exceed the largest ratio over the
/// near half; a lower rate when the smallest far ratio is not below the
/// smallest near ratio. Constants are the extreme ratios at the chosen rate.
///
/// When no rate satisfies a comparison exactly (a bump of the ratio inside the
/// far half, e.g. at the kink of a max(1, ln(1/s)) envelope on a grid that
/// never reaches the decay regime), that side is refitted with the far
/// extreme allowed to exceed the near one by `relaxed_factor`, and `relaxed`
/// is set. The lower rate is clamped to be at least the upper rate.
template <typename Scalar = double>
struct SandwichFit {
  Scalar c_upper = -1;
  Scalar c_lower = -1;
  Scalar log_C_upper = 0;
  Scalar log_C_lower = 0;
  std::size_t worst_upper = 0;
  std::size_t worst_lower = 0;
  bool relaxed = false;
};

template <typename Scalar = double>
struct SandwichProblem {
  std::vector<Scalar> x;
  std::function<Scalar(std::size_t, Scalar)> log_ratio;
};

namespace detail {

template <typename Scalar>
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_near_far(
    const std::vector<Scalar>& x) {
  std::vector<Scalar> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const Scalar median = sorted[sorted.size() / 2];
  std::vector<std::size_t> near, far;
  for (std::size_t i = 0; i < x.size(); ++i) (x[i] < median ? near : far).push_back(i);
  if (near.empty()) {
    // Degenerate scale variable; everything is "near".
    std::swap(near, far);
  }
  return {near, far};
}

}  // namespace detail

template <typename Scalar = double>
SandwichFit<Scalar> fit_sandwich(const SandwichProblem<Scalar>& problem, Scalar c_max = Scalar(10),
                                 Scalar slack = Scalar(1e-9), Scalar relaxed_factor = Scalar(1.25)) {
  if (problem.x.empty()) throw DomainError("fit_sandwich: empty sample set");
  const auto [near, far] = detail::split_near_far(problem.x);
  auto extreme = [&](const std::vector<std::size_t>& idx, Scalar c, bool want_max) {
    Scalar v = want_max ? -std::numeric_limits<Scalar>::infinity()
                        : std::numeric_limits<Scalar>::infinity();
    for (auto i : idx) {
      const Scalar r = problem.log_ratio(i, c);
      v = want_max ? std::max(v, r) : std::min(v, r);
    }
    return v;
  };
  SandwichFit<Scalar> fit;
  if (far.empty()) {
    fit.c_upper = fit.c_lower = c_max;
  } else {
    auto upper = [&](Scalar tol) {
      return largest_admissible<Scalar>(
          [&](Scalar c) { return extreme(far, c, true) <= extreme(near, c, true) + tol; }, c_max);
    };
    auto lower = [&](Scalar tol) {
      return smallest_admissible<Scalar>(
          [&](Scalar c) { return extreme(far, c, false) >= extreme(near, c, false) - tol; }, c_max);
    };
    fit.c_upper = upper(slack);
    if (fit.c_upper < 0) {
      fit.c_upper = upper(std::log(relaxed_factor));
      fit.relaxed = true;
    }
    fit.c_lower = lower(slack);
    if (fit.c_lower < 0) {
      fit.c_lower = lower(std::log(relaxed_factor));
      fit.relaxed = true;
    }
    if (fit.c_upper >= 0 && fit.c_lower >= 0 && fit.c_lower < fit.c_upper) fit.c_lower = fit.c_upper;
  }
  if (fit.c_upper >= 0) {
    fit.log_C_upper = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = 0; i < problem.x.size(); ++i) {
      const Scalar r = problem.log_ratio(i, fit.c_upper);
      if (r > fit.log_C_upper) {
        fit.log_C_upper = r;
        fit.worst_upper = i;
      }
    }
  }
  if (fit.c_lower >= 0) {
    fit.log_C_lower = std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = 0; i < problem.x.size(); ++i) {
      const Scalar r = problem.log_ratio(i, fit.c_lower);
      if (r < fit.log_C_lower) {
        fit.log_C_lower = r;
        fit.worst_lower = i;
      }
    }
  }
  return fit;
}

}  // namespace ends_sqfn
