#pragma once

// Resolvent powers and square functions on a ModelManifold.
//
//   u_k = (Delta + k^2)^{-M} f          (M solves with one cached LDLT per k)
//   S f(x)^2 = sum_k w_k k^{4M-3} |grad u_k|^2(x)
//   s f(x)^2 = sum_k w_k k^{4M-5} |Delta u_k|^2(x)
//
// The k-rule is a log-uniform trapezoid with k = 1 as a node, split into a
// low (k <= 1) and a high (k >= 1) range, each closed by an analytic power
// tail.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "ends_sqfn/errors.hpp"
#include "ends_sqfn/radial_model.hpp"

namespace ends_sqfn {

enum class EnergyRange { low, high, full };

inline const char* to_string(EnergyRange r) {
  switch (r) {
    case EnergyRange::low: return "low";
    case EnergyRange::high: return "high";
    case EnergyRange::full: return "full";
  }
  return "?";
}

inline EnergyRange parse_energy_range(const std::string& s) {
  if (s == "low") return EnergyRange::low;
  if (s == "high") return EnergyRange::high;
  if (s == "full") return EnergyRange::full;
  throw DomainError("unknown energy range '" + s + "'");
}

template <typename Scalar = double>
class SpectralGrid {
 public:
  /// Log-uniform nodes 10^{i/ppd} covering [k_lo, k_hi] (both rounded outward
  /// to the lattice), with k = 1 always a node.
  SpectralGrid(Scalar k_lo, Scalar k_hi, int points_per_decade = 32) : ppd_(points_per_decade) {
    if (!(k_lo > 0) || !(k_lo < 1) || !(k_hi >= 1) || ppd_ < 1) {
      throw DomainError("SpectralGrid: need 0 < k_lo < 1 <= k_hi and points_per_decade >= 1");
    }
    const int below = static_cast<int>(std::ceil(Scalar(ppd_) * std::log10(1 / k_lo) - Scalar(1e-9)));
    const int above = static_cast<int>(std::ceil(Scalar(ppd_) * std::log10(k_hi) - Scalar(1e-9)));
    for (int i = -below; i <= above; ++i) nodes_.push_back(std::pow(Scalar(10), Scalar(i) / Scalar(ppd_)));
    split_ = static_cast<std::size_t>(below);
    nodes_[split_] = 1;
  }

  /// Default grid for a model: k_lo = 10 / r_max, k_hi = 10 / h_min.
  static SpectralGrid for_model(const ModelManifold<Scalar>& model, int points_per_decade = 32) {
    Scalar r_max = 0;
    for (const auto& e : model.ends()) r_max = std::max(r_max, e.r_max);
    return SpectralGrid(10 / r_max, std::max(Scalar(1), 10 / model.h_min()), points_per_decade);
  }

  const std::vector<Scalar>& nodes() const { return nodes_; }
  Scalar k_lo() const { return nodes_.front(); }
  Scalar k_split() const { return Scalar(1); }
  Scalar k_hi() const { return nodes_.back(); }
  int points_per_decade() const { return ppd_; }
  std::size_t split_index() const { return split_; }

  /// Weights w_k for integrands I(k) behaving like k^{low_power} as k -> 0
  /// and like k^{high_power} (< -1) as k -> infinity. Nodes outside `range`
  /// get weight 0; the low and high ranges each take half weight at k = 1 so
  /// that their sum is the full-range rule.
  std::vector<Scalar> weights(EnergyRange range, Scalar low_power, Scalar high_power) const {
    if (!(low_power > -1) || !(high_power < -1)) {
      throw DomainError("SpectralGrid::weights: tail powers must satisfy low > -1, high < -1");
    }
    const Scalar du = std::log(Scalar(10)) / Scalar(ppd_);
    std::vector<Scalar> w(nodes_.size(), Scalar(0));
    const bool low = range != EnergyRange::high;
    const bool high = range != EnergyRange::low;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Scalar base = nodes_[i] * du;
      if (low && i <= split_) w[i] += (i == 0 || i == split_) ? base / 2 : base;
      if (high && i >= split_) w[i] += (i == split_ || i + 1 == nodes_.size()) ? base / 2 : base;
    }
    if (low) w.front() += nodes_.front() / (low_power + 1);
    if (high) w.back() += nodes_.back() / (-high_power - 1);
    return w;
  }

 private:
  int ppd_;
  std::size_t split_ = 0;
  std::vector<Scalar> nodes_;
};

template <typename Scalar = double>
struct SolveReport {
  Scalar k = 0;
  int M = 0;
  // Largest normwise backward error over the M solves in L^2(mu),
  //   ||(Delta + k^2) u_{i+1} - u_i|| / (||Delta + k^2||_inf ||u_{i+1}|| + ||u_i||),
  // which a stable direct solve controls independently of the conditioning.
  Scalar residual = 0;
  // ||(Delta + k^2)^M u - f||_2 / ||f||_2 in L^2(mu); amplified by cond(B)^M at small k.
  Scalar round_trip = 0;
  bool reused_factorization = false;
};

/// Caches one sparse LDLT of A + k^2 D per k (D = diag(mu)). Not thread-safe:
/// give each worker its own solver.
template <typename Scalar = double>
class ResolventSolver {
 public:
  using Factor = Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>>;

  explicit ResolventSolver(const ModelManifold<Scalar>& model) : model_(&model) {}

  const ModelManifold<Scalar>& model() const { return *model_; }

  /// One application of (Delta + k^2)^{-1}.
  Vector<Scalar> solve(Scalar k, const Vector<Scalar>& f, bool* reused = nullptr) {
    const Factor& fac = factor(k, reused);
    Vector<Scalar> u = fac.solve(model_->measure().cwiseProduct(f));
    if (fac.info() != Eigen::Success) throw SolverError("resolvent solve failed at k = " + std::to_string(double(k)));
    return u;
  }

  std::size_t cached() const { return cache_.size(); }
  void clear() { cache_.clear(); }

 private:
  const Factor& factor(Scalar k, bool* reused) {
    auto it = cache_.find(k);
    if (reused) *reused = it != cache_.end();
    if (it != cache_.end()) return *it->second;
    if (!(k > 0)) throw DomainError("resolvent: k must be positive");
    Eigen::SparseMatrix<Scalar> shifted = model_->stiffness();
    for (Eigen::Index v = 0; v < model_->size(); ++v) shifted.coeffRef(v, v) += k * k * model_->measure()(v);
    auto fac = std::make_unique<Factor>(shifted);
    if (fac->info() != Eigen::Success) {
      throw SolverError("LDLT factorization failed at k = " + std::to_string(double(k)));
    }
    return *cache_.emplace(k, std::move(fac)).first->second;
  }

  const ModelManifold<Scalar>* model_;
  std::map<Scalar, std::unique_ptr<Factor>> cache_;
};

/// ||g||_p in L^p(mu); p = infinity gives max |g_v|.
template <typename Scalar, typename Derived>
Scalar lp_norm(const ModelManifold<Scalar>& model, const Eigen::MatrixBase<Derived>& g, Scalar p) {
  if (std::isinf(p)) return g.cwiseAbs().maxCoeff();
  if (!(p >= 1)) throw DomainError("lp_norm: p must be >= 1");
  Scalar acc = 0;
  for (Eigen::Index v = 0; v < model.size(); ++v) acc += model.measure()(v) * std::pow(std::abs(g(v)), p);
  return std::pow(acc, 1 / p);
}

/// (Delta + k^2)^{-M} f by M solves sharing one factorization; the report
/// carries the round-trip residual.
template <typename Scalar = double>
std::pair<Vector<Scalar>, SolveReport<Scalar>> resolvent_apply(ResolventSolver<Scalar>& solver, Scalar k, int M,
                                                               const Vector<Scalar>& f, bool with_residual = true) {
  if (M < 1) throw DomainError("resolvent_apply: M must be >= 1");
  SolveReport<Scalar> rep;
  rep.k = k;
  rep.M = M;
  std::vector<Vector<Scalar>> steps;
  if (with_residual) steps.push_back(f);
  Vector<Scalar> u = f;
  for (int i = 0; i < M; ++i) {
    bool reused = false;
    u = solver.solve(k, u, &reused);
    if (i == 0) rep.reused_factorization = reused;
    if (with_residual) steps.push_back(u);
  }
  if (with_residual) {
    const auto& model = solver.model();
    const auto& A = model.stiffness();
    const Vector<Scalar>& mu = model.measure();
    // ||Delta + k^2||_inf = max_v (sum_w |A_vw|) / mu_v + k^2
    Scalar op_norm = 0;
    for (Eigen::Index v = 0; v < A.outerSize(); ++v) {
      Scalar row = 0;
      for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(A, v); it; ++it) row += std::abs(it.value());
      op_norm = std::max(op_norm, row / mu(v));
    }
    op_norm += k * k;
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
      const Vector<Scalar> r = laplacian_apply(model, steps[i + 1]) + (k * k) * steps[i + 1] - steps[i];
      const Scalar scale = op_norm * lp_norm(model, steps[i + 1], Scalar(2)) + lp_norm(model, steps[i], Scalar(2));
      if (scale > 0) rep.residual = std::max(rep.residual, lp_norm(model, r, Scalar(2)) / scale);
    }
    Vector<Scalar> back = u;
    for (int i = 0; i < M; ++i) back = laplacian_apply(model, back) + k * k * back;
    const Scalar fn = lp_norm(model, f, Scalar(2));
    rep.round_trip = fn > 0 ? lp_norm(model, Vector<Scalar>(back - f), Scalar(2)) / fn : Scalar(0);
  }
  return {std::move(u), rep};
}

template <typename Scalar = double>
std::pair<Vector<Scalar>, SolveReport<Scalar>> resolvent_apply(const ModelManifold<Scalar>& model, Scalar k, int M,
                                                               const RadialFunction<Scalar>& f) {
  ResolventSolver<Scalar> solver(model);
  return resolvent_apply(solver, k, M, f.values);
}

/// Edge gradient (g_outer - g_inner) / h_e, with g = 0 on the Dirichlet ghost.
template <typename Scalar, typename Derived>
Vector<Scalar> grad_apply(const ModelManifold<Scalar>& model, const Eigen::MatrixBase<Derived>& g) {
  const auto& edges = model.edges();
  Vector<Scalar> out(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    const Scalar outer = e.dirichlet() ? Scalar(0) : g(e.v);
    out(static_cast<Eigen::Index>(i)) = (outer - g(e.u)) / e.length;
  }
  return out;
}

/// Edge measures nu_e = c_e h_e^2.
template <typename Scalar = double>
Vector<Scalar> edge_measure(const ModelManifold<Scalar>& model) {
  const auto& edges = model.edges();
  Vector<Scalar> out(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t i = 0; i < edges.size(); ++i) out(static_cast<Eigen::Index>(i)) = edges[i].measure();
  return out;
}

/// |grad g|^2 at nodes: each edge's nu_e |grad_e|^2 is split evenly between its
/// endpoints (wholly to the inner node for a Dirichlet edge) and divided by
/// mu_v, so that sum_v mu_v |grad g|^2_v = Q(g) exactly.
template <typename Scalar, typename Derived>
Vector<Scalar> grad_sq_nodes(const ModelManifold<Scalar>& model, const Eigen::MatrixBase<Derived>& g) {
  Vector<Scalar> out = Vector<Scalar>::Zero(model.size());
  for (const auto& e : model.edges()) {
    const Scalar diff = (e.dirichlet() ? Scalar(0) : g(e.v)) - g(e.u);
    const Scalar energy = e.conductance * diff * diff;
    if (e.dirichlet()) {
      out(e.u) += energy;
    } else {
      out(e.u) += energy / 2;
      out(e.v) += energy / 2;
    }
  }
  return out.cwiseQuotient(model.measure());
}

enum class SquareFunctionKind { vertical, horizontal };

inline const char* to_string(SquareFunctionKind k) {
  return k == SquareFunctionKind::vertical ? "vertical" : "horizontal";
}

inline SquareFunctionKind parse_square_function_kind(const std::string& s) {
  if (s == "vertical") return SquareFunctionKind::vertical;
  if (s == "horizontal") return SquareFunctionKind::horizontal;
  throw DomainError("unknown square function kind '" + s + "'");
}

/// k-power of the square-function measure: 4M-3 (vertical) or 4M-5 (horizontal).
inline int sqfn_power(SquareFunctionKind kind, int M) { return kind == SquareFunctionKind::vertical ? 4 * M - 3 : 4 * M - 5; }

/// L^2 constant ||Sf||^2/||f||^2: 1/(2(2M-1)) vertical, 1/(2(2M-1)(2M-2)) horizontal.
inline double sqfn_l2_constant(SquareFunctionKind kind, int M) {
  return kind == SquareFunctionKind::vertical ? 1.0 / (2.0 * (2 * M - 1))
                                              : 1.0 / (2.0 * (2 * M - 1) * (2 * M - 2));
}

/// Square of the selected square function at every node.
template <typename Scalar = double>
Vector<Scalar> square_function_sq(ResolventSolver<Scalar>& solver, const SpectralGrid<Scalar>& grid,
                                  SquareFunctionKind kind, int M, const Vector<Scalar>& f, EnergyRange range) {
  if (M < 1) throw DomainError("square function: M must be >= 1");
  if (kind == SquareFunctionKind::horizontal && M < 2) throw DomainError("horizontal square function needs M >= 2");
  const auto& model = solver.model();
  const int power = sqfn_power(kind, M);
  const auto w = grid.weights(range, Scalar(power), Scalar(power - 4 * M));
  Vector<Scalar> acc = Vector<Scalar>::Zero(model.size());
  if (f.isZero(0)) return acc;
  const auto& ks = grid.nodes();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (w[i] == 0) continue;
    const Scalar k = ks[i];
    const Vector<Scalar> u = resolvent_apply(solver, k, M, f, false).first;
    const Scalar wk = w[i] * std::pow(k, Scalar(power));
    if (kind == SquareFunctionKind::vertical) {
      acc += wk * grad_sq_nodes(model, u);
    } else {
      acc += wk * laplacian_apply(model, u).cwiseAbs2();
    }
  }
  return acc;
}

template <typename Scalar = double>
RadialFunction<Scalar> vertical_sqfn(ResolventSolver<Scalar>& solver, const SpectralGrid<Scalar>& grid, int M,
                                     const Vector<Scalar>& f, EnergyRange range) {
  RadialFunction<Scalar> out;
  out.values = square_function_sq(solver, grid, SquareFunctionKind::vertical, M, f, range).cwiseSqrt();
  out.metadata["profile"] = "vertical square function";
  out.metadata["M"] = std::to_string(M);
  out.metadata["range"] = to_string(range);
  return out;
}

template <typename Scalar = double>
RadialFunction<Scalar> horizontal_sqfn(ResolventSolver<Scalar>& solver, const SpectralGrid<Scalar>& grid, int M,
                                       const Vector<Scalar>& f, EnergyRange range) {
  RadialFunction<Scalar> out;
  out.values = square_function_sq(solver, grid, SquareFunctionKind::horizontal, M, f, range).cwiseSqrt();
  out.metadata["profile"] = "horizontal square function";
  out.metadata["M"] = std::to_string(M);
  out.metadata["range"] = to_string(range);
  return out;
}

template <typename Scalar = double>
RadialFunction<Scalar> vertical_sqfn(const ModelManifold<Scalar>& model, const SpectralGrid<Scalar>& grid, int M,
                                     const RadialFunction<Scalar>& f, EnergyRange range) {
  ResolventSolver<Scalar> solver(model);
  return vertical_sqfn(solver, grid, M, f.values, range);
}

template <typename Scalar = double>
RadialFunction<Scalar> horizontal_sqfn(const ModelManifold<Scalar>& model, const SpectralGrid<Scalar>& grid, int M,
                                       const RadialFunction<Scalar>& f, EnergyRange range) {
  ResolventSolver<Scalar> solver(model);
  return horizontal_sqfn(solver, grid, M, f.values, range);
}

/// Reconstruction constant: c_M = 2(2M-1) (vertical), c'_M = (2M-1)(2M-2)
/// (horizontal, in the t-variable of (t Delta)^2 (1 + t Delta)^{-2M} dt/t).
inline double reconstruction_constant(SquareFunctionKind kind, int M) {
  return kind == SquareFunctionKind::vertical ? 2.0 * (2 * M - 1) : double((2 * M - 1) * (2 * M - 2));
}

/// ||f - rec f||_2 / ||f||_2 where rec f is the k-quadrature of
///   vertical:   c_M  sum_k w_k k^{4M-3} Delta   (Delta + k^2)^{-2M} f
///   horizontal: 2c'_M sum_k w_k k^{4M-5} Delta^2 (Delta + k^2)^{-2M} f
/// (the factor 2 is dt/t = 2 dk/k under t = k^{-2}).
template <typename Scalar = double>
Scalar resolution_identity_residual(ResolventSolver<Scalar>& solver, const SpectralGrid<Scalar>& grid, int M,
                                    const Vector<Scalar>& f, SquareFunctionKind kind) {
  if (M < 1 || (kind == SquareFunctionKind::horizontal && M < 2)) {
    throw DomainError("resolution identity: need M >= 1 (vertical) or M >= 2 (horizontal)");
  }
  const auto& model = solver.model();
  const int power = sqfn_power(kind, M);
  const auto w = grid.weights(EnergyRange::full, Scalar(power), Scalar(power - 4 * M));
  const Scalar c = kind == SquareFunctionKind::vertical ? Scalar(reconstruction_constant(kind, M))
                                                        : 2 * Scalar(reconstruction_constant(kind, M));
  Vector<Scalar> rec = Vector<Scalar>::Zero(model.size());
  const auto& ks = grid.nodes();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    // Factored as R^M (Delta R^M f) or Delta R^M (Delta R^M f), R = (Delta + k^2)^{-1}:
    // each Delta then acts on a vector of the size of f, never on R^{2M} f.
    const Vector<Scalar> half = laplacian_apply(model, resolvent_apply(solver, ks[i], M, f, false).first);
    Vector<Scalar> term = resolvent_apply(solver, ks[i], M, half, false).first;
    if (kind == SquareFunctionKind::horizontal) term = laplacian_apply(model, term);
    rec += (w[i] * std::pow(ks[i], Scalar(power))) * term;
  }
  rec *= c;
  const Scalar fn = lp_norm(model, f, Scalar(2));
  if (!(fn > 0)) return Scalar(0);
  return lp_norm(model, Vector<Scalar>(rec - f), Scalar(2)) / fn;
}

}  // namespace ends_sqfn
