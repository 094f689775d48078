#pragma once

// Discrete radial model of a manifold with ends.
//
// Each end i carries the density r^{n_i - 1} on a geometric grid
// r_m = r_min q^m (m = 0..N_i-1) with a Dirichlet ghost at r_max. All ends are
// glued at a single hub node sitting one grid step inside r_min. Node m owns
// the cell (r_{m-1}, r_m], so ball volumes are exact at node radii. The
// stiffness matrix A is the edge-sum
//
//   Q(f) = sum_e c_e (f_u - f_v)^2,     c_e = omega(sqrt(r_u r_v)) / h_e,
//
// and the Laplacian is Delta = mu^{-1} A, self-adjoint in L^2(mu).

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ends_sqfn/errors.hpp"

namespace ends_sqfn {

template <typename Scalar = double>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
struct EndProfile {
  int n = 3;
  Scalar r_min = 1;
  Scalar r_max = Scalar(1e9);
  int points_per_decade = 64;

  int node_count() const {
    return static_cast<int>(std::lround(Scalar(points_per_decade) * std::log10(r_max / r_min)));
  }
};

/// An edge between nodes u (inner) and v (outer); v = -1 is the Dirichlet ghost.
template <typename Scalar = double>
struct ModelEdge {
  Eigen::Index u = 0;
  Eigen::Index v = -1;
  Scalar conductance = 0;
  Scalar length = 0;

  bool dirichlet() const { return v < 0; }
  /// Edge measure nu_e = c_e h_e^2, so that sum_e nu_e |grad_e|^2 = Q.
  Scalar measure() const { return conductance * length * length; }
};

template <typename Scalar = double>
class ModelManifold {
 public:
  using Index = Eigen::Index;

  explicit ModelManifold(std::vector<EndProfile<Scalar>> ends) : ends_(std::move(ends)) { build(); }

  Index size() const { return measure_.size(); }
  int end_count() const { return static_cast<int>(ends_.size()); }
  const std::vector<EndProfile<Scalar>>& ends() const { return ends_; }
  const EndProfile<Scalar>& end(int i) const { return ends_.at(i); }
  int n_min() const { return n_min_; }

  const Vector<Scalar>& measure() const { return measure_; }
  const Vector<Scalar>& radius() const { return radius_; }
  const std::vector<ModelEdge<Scalar>>& edges() const { return edges_; }
  const Eigen::SparseMatrix<Scalar>& stiffness() const { return stiffness_; }
  Scalar hub_measure() const { return measure_(0); }

  /// End index of a node, or -1 for the hub.
  int end_of(Index node) const { return end_of_[node]; }
  Index end_offset(int i) const { return offsets_.at(i); }
  Index end_size(int i) const { return counts_.at(i); }
  Scalar grid_ratio(int i) const { return ratios_.at(i); }

  /// True for nodes attached to the Dirichlet ghost.
  bool boundary_node(Index node) const { return boundary_[node] != 0; }

  /// Shortest edge length.
  Scalar h_min() const { return h_min_; }

 private:
  void build() {
    if (ends_.empty() || ends_.size() > 8) throw DomainError("build_model: need 1 to 8 ends");
    n_min_ = ends_.front().n;
    Index total = 1;
    for (const auto& e : ends_) {
      if (e.n < 3) throw DomainError("build_model: end dimension n must be >= 3, got " + std::to_string(e.n));
      if (!(e.r_min > 0) || !(e.r_max >= Scalar(1e3) * e.r_min)) {
        throw DomainError("build_model: need r_max >= 1e3 r_min > 0");
      }
      if (e.points_per_decade < 1) throw DomainError("build_model: points_per_decade must be positive");
      if (e.node_count() < 100) {
        throw DomainError("build_model: an end needs at least 100 nodes, got " + std::to_string(e.node_count()));
      }
      n_min_ = std::min(n_min_, e.n);
      total += e.node_count();
    }
    measure_.resize(total);
    radius_.resize(total);
    end_of_.assign(total, -1);
    boundary_.assign(total, 0);
    h_min_ = std::numeric_limits<Scalar>::infinity();

    Scalar hub_mu = 0;
    Index next = 1;
    for (int i = 0; i < end_count(); ++i) {
      const auto& e = ends_[i];
      const int count = e.node_count();
      const Scalar q = std::pow(e.r_max / e.r_min, Scalar(1) / Scalar(count));
      const Scalar dim = Scalar(e.n);
      auto omega = [&](Scalar r) { return std::pow(r, dim - 1); };
      auto cell = [&](Scalar lo, Scalar hi) { return (std::pow(hi, dim) - std::pow(lo, dim)) / dim; };
      offsets_.push_back(next);
      counts_.push_back(count);
      ratios_.push_back(q);
      hub_mu += std::pow(e.r_min, dim) / dim;

      Scalar prev = e.r_min / q;  // hub position seen from this end
      Index prev_node = 0;
      for (int m = 0; m < count; ++m) {
        const Scalar r = m == 0 ? e.r_min : e.r_min * std::pow(q, Scalar(m));
        const Index node = next + m;
        radius_(node) = r;
        measure_(node) = cell(prev, r);
        end_of_[node] = i;
        add_edge(prev_node, node, omega(std::sqrt(prev * r)), r - prev);
        prev = r;
        prev_node = node;
      }
      add_edge(prev_node, -1, omega(std::sqrt(prev * e.r_max)), e.r_max - prev);
      boundary_[prev_node] = 1;
      next += count;
    }
    measure_(0) = hub_mu;
    radius_(0) = 0;

    std::vector<Eigen::Triplet<Scalar>> trip;
    trip.reserve(4 * edges_.size());
    for (const auto& e : edges_) {
      trip.emplace_back(e.u, e.u, e.conductance);
      if (!e.dirichlet()) {
        trip.emplace_back(e.v, e.v, e.conductance);
        trip.emplace_back(e.u, e.v, -e.conductance);
        trip.emplace_back(e.v, e.u, -e.conductance);
      }
    }
    stiffness_.resize(total, total);
    stiffness_.setFromTriplets(trip.begin(), trip.end());
  }

  void add_edge(Index u, Index v, Scalar omega_mid, Scalar h) {
    edges_.push_back({u, v, omega_mid / h, h});
    h_min_ = std::min(h_min_, h);
  }

  std::vector<EndProfile<Scalar>> ends_;
  int n_min_ = 0;
  Vector<Scalar> measure_;
  Vector<Scalar> radius_;
  std::vector<int> end_of_;
  std::vector<char> boundary_;
  std::vector<Index> offsets_;
  std::vector<Index> counts_;
  std::vector<Scalar> ratios_;
  std::vector<ModelEdge<Scalar>> edges_;
  Eigen::SparseMatrix<Scalar> stiffness_;
  Scalar h_min_ = 0;
};

template <typename Scalar = double>
ModelManifold<Scalar> build_model(const std::vector<EndProfile<Scalar>>& ends) {
  return ModelManifold<Scalar>(ends);
}

/// Node values plus free-form metadata describing how they were generated.
template <typename Scalar = double>
struct RadialFunction {
  Vector<Scalar> values;
  std::map<std::string, std::string> metadata;
  std::vector<std::string> warnings;

  Eigen::Index support_size() const { return (values.array() != Scalar(0)).count(); }
};

// ---------------------------------------------------------------------------
// Operators

/// (Delta f)_u = mu_u^{-1} sum_{e ~ u} c_e (f_u - f_v), with f = 0 on the ghost.
/// Edge-loop form: constants are annihilated exactly away from the boundary.
template <typename Scalar, typename Derived>
Vector<Scalar> laplacian_apply(const ModelManifold<Scalar>& model, const Eigen::MatrixBase<Derived>& f) {
  Vector<Scalar> out = Vector<Scalar>::Zero(model.size());
  for (const auto& e : model.edges()) {
    const Scalar fv = e.dirichlet() ? Scalar(0) : f(e.v);
    const Scalar flux = e.conductance * (f(e.u) - fv);
    out(e.u) += flux;
    if (!e.dirichlet()) out(e.v) -= flux;
  }
  return out.cwiseQuotient(model.measure());
}

template <typename Scalar, typename Derived>
Scalar quadratic_form(const ModelManifold<Scalar>& model, const Eigen::MatrixBase<Derived>& f) {
  Scalar q = 0;
  for (const auto& e : model.edges()) {
    const Scalar diff = f(e.u) - (e.dirichlet() ? Scalar(0) : f(e.v));
    q += e.conductance * diff * diff;
  }
  return q;
}

/// <f, g>_mu
template <typename Scalar, typename D1, typename D2>
Scalar inner(const ModelManifold<Scalar>& model, const Eigen::MatrixBase<D1>& f, const Eigen::MatrixBase<D2>& g) {
  return (model.measure().array() * f.array() * g.array()).sum();
}

/// Measure of the ball of radius r about the hub restricted to end i: the
/// nodes with r_v <= r plus the covered part of the next cell (cells are the
/// intervals (r_{m-1}, r_m]).
template <typename Scalar = double>
Scalar ball_volume(const ModelManifold<Scalar>& model, int end_index, Scalar r) {
  const auto& e = model.end(end_index);
  const Eigen::Index off = model.end_offset(end_index), count = model.end_size(end_index);
  const Scalar q = model.grid_ratio(end_index);
  const Scalar dim = Scalar(e.n);
  Scalar v = 0;
  Scalar prev = e.r_min / q;
  for (Eigen::Index m = 0; m < count; ++m) {
    const Scalar rv = model.radius()(off + m);
    if (rv <= r) {
      v += model.measure()(off + m);
    } else {
      if (r > prev) v += model.measure()(off + m) * (std::pow(r, dim) - std::pow(prev, dim)) /
                         (std::pow(rv, dim) - std::pow(prev, dim));
      break;
    }
    prev = rv;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Radial profiles

namespace detail {

template <typename Scalar>
void validate_end(const ModelManifold<Scalar>& model, int end_index) {
  if (end_index < 0 || end_index >= model.end_count()) {
    throw DomainError("end index " + std::to_string(end_index) + " out of range");
  }
}

}  // namespace detail

/// 0 below r_a, 1 above r_b, cubic smoothstep in log r between, on one end;
/// 0 on the hub and all other ends.
template <typename Scalar = double>
RadialFunction<Scalar> cutoff(const ModelManifold<Scalar>& model, int end_index, Scalar r_a, Scalar r_b) {
  detail::validate_end(model, end_index);
  const auto& e = model.end(end_index);
  if (!(e.r_min <= r_a) || !(r_a < r_b) || !(r_b <= e.r_max / 100)) {
    throw DomainError("cutoff: need r_min <= r_a < r_b <= r_max/100");
  }
  RadialFunction<Scalar> out;
  out.values = Vector<Scalar>::Zero(model.size());
  const Eigen::Index off = model.end_offset(end_index), count = model.end_size(end_index);
  const Scalar span = std::log(r_b / r_a);
  for (Eigen::Index m = 0; m < count; ++m) {
    const Scalar t = std::clamp(std::log(model.radius()(off + m) / r_a) / span, Scalar(0), Scalar(1));
    out.values(off + m) = t * t * (3 - 2 * t);
  }
  out.metadata["profile"] = "cutoff";
  out.metadata["end"] = std::to_string(end_index);
  out.metadata["ramp"] = std::to_string(double(r_a)) + ":" + std::to_string(double(r_b));
  return out;
}

/// True when n eps ln(r_max) < 3, i.e. truncation at r_max visibly bends the
/// eps-asymptotics of the witness norm.
template <typename Scalar = double>
bool witness_truncated(int n, Scalar eps, Scalar r_max) {
  return Scalar(n) * eps * std::log(r_max) < Scalar(3);
}

/// f_eps = r^{-(n/p)(1+eps)} times the cutoff on the chosen end.
template <typename Scalar = double>
RadialFunction<Scalar> witness_function(const ModelManifold<Scalar>& model, int end_index, Scalar p, Scalar eps,
                                        Scalar r_a, Scalar r_b) {
  detail::validate_end(model, end_index);
  if (!(p > 1) || p > 20) throw DomainError("witness_function: p must lie in (1, 20]");
  if (!(eps > 0) || eps > 1) throw DomainError("witness_function: eps must lie in (0, 1]");
  RadialFunction<Scalar> out = cutoff(model, end_index, r_a, r_b);
  const auto& e = model.end(end_index);
  const Scalar power = -(Scalar(e.n) / p) * (1 + eps);
  const Eigen::Index off = model.end_offset(end_index), count = model.end_size(end_index);
  for (Eigen::Index m = 0; m < count; ++m) out.values(off + m) *= std::pow(model.radius()(off + m), power);
  out.metadata["profile"] = "witness";
  out.metadata["p"] = std::to_string(double(p));
  out.metadata["eps"] = std::to_string(double(eps));
  if (witness_truncated(e.n, eps, e.r_max)) {
    out.warnings.push_back("n*eps*ln(r_max) < 3: truncation at r_max pollutes the eps-asymptotics");
  }
  return out;
}

/// Closed-form L^p norm of the untruncated-ramp witness,
/// ((1 - r_max^{-n eps}) / (n eps))^{1/p} for r_min = 1.
template <typename Scalar = double>
Scalar witness_norm_estimate(int n, Scalar p, Scalar eps, Scalar r_max) {
  const Scalar ne = Scalar(n) * eps;
  return std::pow(-std::expm1(-ne * std::log(r_max)) / ne, 1 / p);
}

/// Node table as CSV: node,end,radius,measure,boundary.
template <typename Scalar = double>
void write_model_csv(const ModelManifold<Scalar>& model, std::ostream& os) {
  os << "node,end,radius,measure,boundary\n";
  char buf[128];
  for (Eigen::Index v = 0; v < model.size(); ++v) {
    std::snprintf(buf, sizeof buf, "%ld,%d,%.17g,%.17g,%d\n", static_cast<long>(v), model.end_of(v),
                  double(model.radius()(v)), double(model.measure()(v)), model.boundary_node(v) ? 1 : 0);
    os << buf;
  }
}

}  // namespace ends_sqfn
