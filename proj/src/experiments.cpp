#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <span>

#include "ends_sqfn/experiments.hpp"
#include "ends_sqfn/fitting.hpp"

namespace ends_sqfn::experiments {

namespace {

int end_of_least_dimension(const ModelManifold<double>& model) {
  for (int i = 0; i < model.end_count(); ++i) {
    if (model.end(i).n == model.n_min()) return i;
  }
  return 0;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Smooth plateau on [r_a, r_d] of one end, ramping up on [r_a, r_b] and down on [r_c, r_d].
Vector<double> plateau(const ModelManifold<double>& model, int end, double r_a, double r_b, double r_c, double r_d) {
  return cutoff(model, end, r_a, r_b).values - cutoff(model, end, r_c, r_d).values;
}

}  // namespace

SweepResult witness_sweep(const ModelManifold<double>& model, const SpectralGrid<double>& grid, int M, double p,
                          const std::vector<double>& eps_grid, SquareFunctionKind kind, EnergyRange range) {
  if (eps_grid.size() < 4) throw DomainError("witness_sweep: eps grid needs >= 4 points");
  for (std::size_t i = 1; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] < eps_grid[i - 1])) throw DomainError("witness_sweep: eps grid must strictly decrease");
  }
  if (kind == SquareFunctionKind::vertical && 2 * M >= model.n_min()) {
    throw DomainError("witness_sweep: vertical witness needs 2M < n_min");
  }
  const int end = end_of_least_dimension(model);
  const auto& e = model.end(end);
  for (double eps : eps_grid) {
    if (witness_truncated(e.n, eps, e.r_max)) {
      throw DomainError("witness_sweep: eps = " + fmt(eps) + " is below the truncation guard");
    }
  }

  ResolventSolver<double> solver(model);
  SweepResult res;
  res.eps_grid = eps_grid;
  std::vector<double> x, y;
  for (double eps : eps_grid) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto f = witness_function(model, end, p, eps, 1.0, 2.0);
    const Vector<double> s = square_function_sq(solver, grid, kind, M, f.values, range).cwiseSqrt();
    ExperimentRecord rec;
    rec.M = M;
    rec.p = p;
    rec.eps = eps;
    rec.range = to_string(range);
    rec.sample = "witness";
    rec.input_norm = lp_norm(model, f.values, p);
    rec.output_norm = lp_norm(model, s, p);
    rec.ratio = rec.output_norm / rec.input_norm;
    rec.wall_seconds = seconds_since(t0);
    res.ratios.push_back(rec.ratio);
    res.records.push_back(rec);
    x.push_back(std::log(1 / eps));
    y.push_back(std::log(rec.ratio));
  }
  const auto line = fit_line<double>(std::span<const double>(x), std::span<const double>(y));
  res.slope = line.slope;
  res.slope_stderr = line.slope_stderr;
  for (auto& rec : res.records) rec.slope = res.slope;
  return res;
}

std::vector<NamedFunction> default_reverse_samples(const ModelManifold<double>& model, double p) {
  const int end = end_of_least_dimension(model);
  const double r_max = model.end(end).r_max;
  std::vector<NamedFunction> out;

  // Oscillation in log r under a plateau on [1, 400].
  Vector<double> osc = plateau(model, end, 1, 2, 200, 400);
  for (Eigen::Index m = 0; m < model.end_size(end); ++m) {
    const Eigen::Index v = model.end_offset(end) + m;
    osc(v) *= std::sin(3 * std::log(model.radius()(v)));
  }
  out.push_back({"oscillatory", osc});

  // Bumps on every end, one unit of height each.
  Vector<double> bump = Vector<double>::Zero(model.size());
  for (int i = 0; i < model.end_count(); ++i) bump += plateau(model, i, 1, 2, 10, 20);
  out.push_back({"bump", bump});

  // Witness profile with its far tail tapered off well inside the Dirichlet boundary.
  Vector<double> wit = witness_function(model, end, p, 0.2, 1.0, 2.0).values;
  wit = wit.cwiseProduct(Vector<double>::Ones(model.size()) - cutoff(model, end, r_max * 1e-3, r_max * 1e-2).values);
  out.push_back({"witness", wit});
  return out;
}

ReverseResult reverse_check(const ModelManifold<double>& model, const SpectralGrid<double>& grid, int M, double p,
                            const std::vector<NamedFunction>& samples) {
  ResolventSolver<double> solver(model);
  ReverseResult res;
  for (const auto& s : samples) {
    const auto t0 = std::chrono::steady_clock::now();
    const double in = lp_norm(model, s.values, p);
    if (!(in > 0)) continue;
    const Vector<double> sf =
        square_function_sq(solver, grid, SquareFunctionKind::vertical, M, s.values, EnergyRange::full).cwiseSqrt();
    const double out = lp_norm(model, sf, p);
    ExperimentRecord rec;
    rec.M = M;
    rec.p = p;
    rec.range = to_string(EnergyRange::full);
    rec.sample = s.name;
    rec.input_norm = in;
    rec.output_norm = out;
    rec.ratio = out > 0 ? in / out : std::numeric_limits<double>::infinity();
    rec.wall_seconds = seconds_since(t0);
    res.names.push_back(s.name);
    res.ratios.push_back(rec.ratio);
    res.max_ratio = std::max(res.max_ratio, rec.ratio);
    res.records.push_back(rec);
  }
  return res;
}

L2Result l2_constant_check(const ModelManifold<double>& model, const SpectralGrid<double>& grid,
                           SquareFunctionKind kind, int M, int samples, std::uint64_t seed) {
  if (samples < 1) throw DomainError("l2_constant_check: samples must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0, 1);
  ResolventSolver<double> solver(model);
  L2Result res;
  res.expected = sqfn_l2_constant(kind, M);
  for (int s = 0; s < samples; ++s) {
    Vector<double> f = Vector<double>::Zero(model.size());
    const int bumps = 1 + static_cast<int>(unit(rng) * 3);
    for (int b = 0; b < bumps; ++b) {
      const int end = std::min(model.end_count() - 1, static_cast<int>(unit(rng) * model.end_count()));
      const double c = 3 * std::pow(10.0, unit(rng));  // centre in [3, 30]
      const double w = 1.5 + 1.5 * unit(rng);          // width factor in [1.5, 3]
      const double amp = (unit(rng) < 0.5 ? -1 : 1) * (0.5 + 1.5 * unit(rng));
      f += amp * plateau(model, end, c / w, c, c, c * w);
    }
    const double fn = lp_norm(model, f, 2.0);
    const Vector<double> sq = square_function_sq(solver, grid, kind, M, f, EnergyRange::full);
    const double ratio = model.measure().dot(sq) / (fn * fn);
    res.ratios.push_back(ratio);
    res.worst_rel_error = std::max(res.worst_rel_error, std::abs(ratio - res.expected) / res.expected);
  }
  return res;
}

}  // namespace ends_sqfn::experiments
