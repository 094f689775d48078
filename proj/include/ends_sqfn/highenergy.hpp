#pragma once

// Fourier split of the resolvent symbol (lambda^2 + k^2)^{-M} into a part G
// whose transform lives in |xi| <= r and a remainder H that is exponentially
// small in k r.
//
// Transform convention: hat f(xi) = int e^{-i xi lambda} f(lambda) dlambda, so
// for even symbols f(lambda) = (1/pi) int_0^inf cos(xi lambda) hat f(xi) dxi.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "ends_sqfn/errors.hpp"
#include "ends_sqfn/quadrature.hpp"

namespace ends_sqfn {

/// coef * k^{k_power} * xi^{xi_power} * e^{-k xi}
template <typename Scalar = double>
struct FmTerm {
  int k_power = 0;
  int xi_power = 0;
  Scalar coef = 0;
};

/// Terms of k^{1-2M} F_M(k xi), xi >= 0, built from pi k^{-1} e^{-k xi} by
/// applying -(1/M) d/d(k^2) = -(1/(2 M k)) d/dk.
template <typename Scalar = double>
std::vector<FmTerm<Scalar>> fm_terms(int M) {
  if (M < 1 || M > 4) throw DomainError("fm_terms: supported M is 1..4");
  std::vector<FmTerm<Scalar>> terms{{-1, 0, std::numbers::pi_v<Scalar>}};
  for (int m = 1; m < M; ++m) {
    std::vector<FmTerm<Scalar>> next;
    auto add = [&](int kp, int xp, Scalar c) {
      for (auto& t : next) {
        if (t.k_power == kp && t.xi_power == xp) {
          t.coef += c;
          return;
        }
      }
      next.push_back({kp, xp, c});
    };
    const Scalar s = -Scalar(1) / Scalar(2 * m);
    for (const auto& t : terms) {
      // d/dk [k^a xi^b e^{-k xi}] = a k^{a-1} xi^b e^{-k xi} - k^a xi^{b+1} e^{-k xi}, then times s / k
      if (t.k_power != 0) add(t.k_power - 2, t.xi_power, s * Scalar(t.k_power) * t.coef);
      add(t.k_power - 1, t.xi_power + 1, -s * t.coef);
    }
    terms = std::move(next);
  }
  return terms;
}

/// k^{1-2M} F_M(k |xi|).
template <typename Scalar = double>
Scalar fm_value(const std::vector<FmTerm<Scalar>>& terms, Scalar k, Scalar xi) {
  xi = std::abs(xi);
  Scalar poly = 0;
  for (const auto& t : terms) poly += t.coef * std::pow(k, Scalar(t.k_power)) * std::pow(xi, Scalar(t.xi_power));
  return poly * std::exp(-k * xi);
}

template <typename Scalar = double>
std::vector<Scalar> fm_eval(int M, Scalar k, const std::vector<Scalar>& xi_grid) {
  if (!(k >= 1)) throw DomainError("fm_eval: k must be >= 1");
  const auto terms = fm_terms<Scalar>(M);
  std::vector<Scalar> out;
  out.reserve(xi_grid.size());
  for (Scalar xi : xi_grid) out.push_back(fm_value(terms, k, xi));
  return out;
}

/// Even C^2 window: 1 on |xi| <= 1/2, quintic smoothstep down to 0 at |xi| = 1.
template <typename Scalar = double>
Scalar window(Scalar xi) {
  const Scalar a = std::abs(xi);
  if (a <= Scalar(0.5)) return 1;
  if (a >= 1) return 0;
  const Scalar t = 2 * a - 1;
  return 1 - t * t * t * (10 - 15 * t + 6 * t * t);
}

template <typename Scalar = double>
struct SplitSpec {
  int M = 1;
  Scalar r = 1;
  Scalar k = 1;
  int fft_points = 1 << 14;
  Scalar lambda_max = 8;
  Scalar xi_max = 0;  // 0 selects max(40 max(1, k), 2 r)

  Scalar spectral_cutoff() const { return xi_max > 0 ? xi_max : std::max(40 * std::max(Scalar(1), k), 2 * r); }

  void validate() const {
    if (M < 1 || M > 4) throw DomainError("SplitSpec: supported M is 1..4");
    if (!(r > 0)) throw DomainError("SplitSpec: r must be positive");
    if (!(k >= 1)) throw DomainError("SplitSpec: k must be >= 1");
    if (fft_points < (1 << 14) || (fft_points & (fft_points - 1)) != 0) {
      throw DomainError("SplitSpec: fft_points must be a power of two >= 2^14");
    }
    if (!(lambda_max > 0)) throw DomainError("SplitSpec: lambda_max must be positive");
    const Scalar xi = spectral_cutoff();
    if (xi < 20 * std::max(Scalar(1), k) || xi < 2 * r) {
      throw DomainError("SplitSpec: spectral cutoff must be >= 20 max(1, k) and >= 2 r");
    }
    const auto terms = fm_terms<Scalar>(M);
    if (fm_value(terms, k, xi) > Scalar(1e-12) * fm_value(terms, k, Scalar(0))) {
      throw DomainError("SplitSpec: aliasing guard, transform tail exceeds 1e-12 at the spectral cutoff");
    }
  }
};

template <typename Scalar = double>
struct SplitResult {
  std::vector<Scalar> lambda;
  std::vector<Scalar> G;
  std::vector<Scalar> H;
  Scalar reconstruction_error = 0;  // max |G + H - (lambda^2 + k^2)^{-M}|
};

namespace detail {

// Gauss-Legendre nodes/weights of (1/pi) int_a^b (.) dxi with panels no wider than `width`.
template <typename Scalar>
void cosine_rule(Scalar a, Scalar b, Scalar width, std::vector<Scalar>& x, std::vector<Scalar>& w) {
  static const GaussLegendre<Scalar> gl(20);
  if (!(b > a)) return;
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / width)));
  const Scalar h = (b - a) / Scalar(panels);
  for (int p = 0; p < panels; ++p) {
    const Scalar mid = a + h * (Scalar(p) + Scalar(0.5));
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      x.push_back(mid + h / 2 * gl.nodes[i]);
      w.push_back(gl.weights[i] * h / 2 / std::numbers::pi_v<Scalar>);
    }
  }
}

template <typename Scalar>
Scalar panel_width(const SplitSpec<Scalar>& s) {
  return Scalar(1) / std::max({Scalar(4), Scalar(2) * s.k, s.lambda_max / 2});
}

}  // namespace detail

/// G by quadrature of its windowed transform over [0, r]; H independently over
/// [r/2, Xi] (no subtraction, so H keeps full relative accuracy when tiny).
template <typename Scalar = double>
SplitResult<Scalar> split_eval(const SplitSpec<Scalar>& spec, const std::vector<Scalar>& lambda_grid) {
  spec.validate();
  const auto terms = fm_terms<Scalar>(spec.M);
  const Scalar width = detail::panel_width(spec);
  const Scalar r = spec.r, k = spec.k;
  // Beyond r/2 + 60/k the transform is below e^{-60} of its value at r/2.
  const Scalar xi_end = std::min(spec.spectral_cutoff(), r / 2 + Scalar(60) / k);

  std::vector<Scalar> gx, gw, hx, hw;
  detail::cosine_rule(Scalar(0), r / 2, width, gx, gw);
  detail::cosine_rule(r / 2, r, std::min(width, r / 16), gx, gw);
  detail::cosine_rule(r / 2, r, std::min(width, r / 16), hx, hw);
  detail::cosine_rule(r, std::max(r, xi_end), width, hx, hw);
  for (std::size_t i = 0; i < gx.size(); ++i) gw[i] *= fm_value(terms, k, gx[i]) * window(gx[i] / r);
  for (std::size_t i = 0; i < hx.size(); ++i) hw[i] *= fm_value(terms, k, hx[i]) * (1 - window(hx[i] / r));

  SplitResult<Scalar> out;
  out.lambda = lambda_grid;
  for (Scalar lam : lambda_grid) {
    Scalar g = 0, h = 0;
    for (std::size_t i = 0; i < gx.size(); ++i) g += gw[i] * std::cos(gx[i] * lam);
    for (std::size_t i = 0; i < hx.size(); ++i) h += hw[i] * std::cos(hx[i] * lam);
    out.G.push_back(g);
    out.H.push_back(h);
    const Scalar exact = std::pow(lam * lam + k * k, -Scalar(spec.M));
    out.reconstruction_error = std::max(out.reconstruction_error, std::abs(g + h - exact));
  }
  return out;
}

/// Discrete round trip on fft_points samples of [-Xi, Xi): G and R are
/// synthesized from their transforms, H = R - G is transformed back, and the
/// largest |hat H| on |xi| <= r/2 is returned.
template <typename Scalar = double>
Scalar hat_h_support_error(const SplitSpec<Scalar>& spec) {
  spec.validate();
  const auto terms = fm_terms<Scalar>(spec.M);
  const int n = spec.fft_points;
  const Scalar dxi = 2 * spec.spectral_cutoff() / Scalar(n);
  std::vector<std::complex<Scalar>> g_hat(n), r_hat(n), g, rr, h_hat;
  std::vector<Scalar> xi(n);
  for (int m = 0; m < n; ++m) {
    xi[m] = dxi * Scalar(m < n / 2 ? m : m - n);
    r_hat[m] = fm_value(terms, spec.k, xi[m]);
    g_hat[m] = r_hat[m] * window(xi[m] / spec.r);
  }
  Eigen::FFT<Scalar> fft;
  fft.inv(g, g_hat);
  fft.inv(rr, r_hat);
  std::vector<std::complex<Scalar>> h(n);
  for (int m = 0; m < n; ++m) h[m] = rr[m] - g[m];
  fft.fwd(h_hat, h);
  Scalar worst = 0;
  for (int m = 0; m < n; ++m) {
    if (std::abs(xi[m]) <= spec.r / 2) worst = std::max(worst, std::abs(h_hat[m]));
  }
  return worst;
}

template <typename Scalar = double>
struct HSupFit {
  int M = 1;
  Scalar c = 0;         // common rate
  Scalar C = 0;         // smallest C with sup|H| <= C e^{-c k r} on the grid
  Scalar residual = 0;  // max_k |c_k - c| / c
  bool pass = false;
  Scalar worst_r = 0, worst_k = 0;
  std::vector<Scalar> r_grid, k_grid;
  std::vector<Scalar> per_k_rate;
  std::vector<std::vector<Scalar>> sup;  // [k][r]
  std::vector<std::vector<Scalar>> argmax_lambda;
};

/// Fits log sup_lambda |H| = a_k - c k r with one intercept per k (the
/// k^{-2M} prefactor of sup|H| is exact) and a common rate c.
template <typename Scalar = double>
HSupFit<Scalar> h_sup_bound(int M, const std::vector<Scalar>& r_grid, const std::vector<Scalar>& k_grid,
                            Scalar lambda_max = 8, int lambda_points = 33) {
  if (r_grid.size() < 2 || k_grid.empty()) throw DomainError("h_sup_bound: need >= 2 radii and >= 1 k");
  for (Scalar r : r_grid) {
    if (!(r >= 1) || !(r <= 8)) throw DomainError("h_sup_bound: r must lie in [1, 8]");
  }
  for (Scalar k : k_grid) {
    if (!(k >= 1) || !(k <= 10)) throw DomainError("h_sup_bound: k must lie in [1, 10]");
  }
  std::vector<Scalar> lambdas(lambda_points);
  for (int i = 0; i < lambda_points; ++i) lambdas[i] = lambda_max * Scalar(i) / Scalar(lambda_points - 1);

  HSupFit<Scalar> fit;
  fit.M = M;
  fit.r_grid = r_grid;
  fit.k_grid = k_grid;
  Scalar sxy = 0, sxx = 0;
  for (Scalar k : k_grid) {
    std::vector<Scalar> row, arg;
    for (Scalar r : r_grid) {
      SplitSpec<Scalar> spec;
      spec.M = M;
      spec.r = r;
      spec.k = k;
      spec.lambda_max = lambda_max;
      const auto res = split_eval(spec, lambdas);
      std::size_t best = 0;
      for (std::size_t i = 1; i < res.H.size(); ++i) {
        if (std::abs(res.H[i]) > std::abs(res.H[best])) best = i;
      }
      row.push_back(std::abs(res.H[best]));
      arg.push_back(lambdas[best]);
    }
    Scalar xbar = 0, ybar = 0;
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
      xbar += k * r_grid[i];
      ybar += std::log(row[i]);
    }
    xbar /= Scalar(r_grid.size());
    ybar /= Scalar(r_grid.size());
    Scalar kxy = 0, kxx = 0;
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
      const Scalar dx = k * r_grid[i] - xbar;
      kxy += dx * (std::log(row[i]) - ybar);
      kxx += dx * dx;
    }
    fit.per_k_rate.push_back(-kxy / kxx);
    sxy += kxy;
    sxx += kxx;
    fit.sup.push_back(std::move(row));
    fit.argmax_lambda.push_back(std::move(arg));
  }
  fit.c = -sxy / sxx;
  Scalar worst_dev = -1;
  for (std::size_t j = 0; j < k_grid.size(); ++j) {
    const Scalar dev = std::abs(fit.per_k_rate[j] - fit.c) / std::abs(fit.c);
    fit.residual = std::max(fit.residual, dev);
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
      fit.C = std::max(fit.C, fit.sup[j][i] * std::exp(fit.c * k_grid[j] * r_grid[i]));
    }
    if (dev > worst_dev) {
      worst_dev = dev;
      fit.worst_k = k_grid[j];
      // point of that k farthest below the common-rate line through its mean
      Scalar worst_pt = -1;
      Scalar mean = 0;
      for (std::size_t i = 0; i < r_grid.size(); ++i) mean += std::log(fit.sup[j][i]) + fit.c * k_grid[j] * r_grid[i];
      mean /= Scalar(r_grid.size());
      for (std::size_t i = 0; i < r_grid.size(); ++i) {
        const Scalar d = std::abs(std::log(fit.sup[j][i]) + fit.c * k_grid[j] * r_grid[i] - mean);
        if (d > worst_pt) {
          worst_pt = d;
          fit.worst_r = r_grid[i];
        }
      }
    }
  }
  fit.pass = fit.c >= Scalar(0.3) && fit.residual <= Scalar(0.25);
  return fit;
}

}  // namespace ends_sqfn
