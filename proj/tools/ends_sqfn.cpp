#include <iostream>

#include "CLI11.hpp"
#include "ends_sqfn/experiments.hpp"

using namespace ends_sqfn;
using namespace ends_sqfn::experiments;
using nlohmann::json;

namespace {

struct ModelOptions {
  std::string ends = "3,4";
  double r_min = 1;
  double r_max = 1e9;
  int ppd = 64;
  int k_ppd = 32;

  void attach(CLI::App* app) {
    app->add_option("--ends", ends, "end dimensions, comma separated")->capture_default_str();
    app->add_option("--r-min", r_min, "inner radius of every end")->capture_default_str();
    app->add_option("--r-max", r_max, "Dirichlet radius of every end")->capture_default_str();
    app->add_option("--ppd", ppd, "radial nodes per decade")->capture_default_str();
    app->add_option("--k-ppd", k_ppd, "spectral nodes per decade")->capture_default_str();
  }

  SuiteConfig suite() const {
    SuiteConfig cfg;
    cfg.model.ends = parse_int_list(ends);
    cfg.model.r_min = r_min;
    cfg.model.r_max = r_max;
    cfg.model.points_per_decade = ppd;
    cfg.grid.k_points_per_decade = k_ppd;
    return cfg;
  }
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Square functions on manifolds with ends: kernels, thresholds and experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config, out_dir = "results";
  auto* run = app.add_subcommand("run", "run a configured experiment suite");
  run->add_option("--config", config, "suite config file")->required();
  run->add_option("--out", out_dir, "results directory")->capture_default_str();

  BesselSpec<double> bspec;
  std::string s_grid;
  auto* bessel = app.add_subcommand("bessel", "Bessel potential kernel envelope fit");
  bessel->add_option("--a", bspec.a, "order a")->capture_default_str();
  bessel->add_option("--d", bspec.d, "dimension d")->capture_default_str();
  bessel->add_option("--s", s_grid, "evaluation points (a:b:step or list)");

  int kn = 3, kj = 1;
  std::vector<double> torus;
  double kk = 1, kd = 1;
  std::string bound;
  auto* kernels = app.add_subcommand("kernels", "resolvent kernel on R^n x T^m");
  kernels->add_option("--n", kn, "Euclidean dimension")->capture_default_str();
  kernels->add_option("--torus", torus, "torus circumferences");
  kernels->add_option("--j", kj, "resolvent power")->capture_default_str();
  kernels->add_option("--k", kk, "spectral parameter")->capture_default_str();
  kernels->add_option("--d", kd, "Euclidean separation")->capture_default_str();
  kernels->add_option("--bound", bound, "also fit this bound over a default grid");

  std::string family = "h3", pgrid = "1.5:6:0.25";
  int ni = 3, nj = 3;
  double r_outer = 1e6;
  auto* schur = app.add_subcommand("schur", "Schur-test threshold scan");
  schur->add_option("--family", family, "envelope family (h3, w1)")->capture_default_str();
  schur->add_option("--ni", ni, "dimension of the x end")->capture_default_str();
  schur->add_option("--nj", nj, "dimension of the y end")->capture_default_str();
  schur->add_option("--pgrid", pgrid, "exponents p")->capture_default_str();
  schur->add_option("--r-outer", r_outer, "outer truncation radius")->capture_default_str();

  std::string hM = "1,2,3", rgrid = "1:8", kgrid = "1:10";
  auto* high = app.add_subcommand("highenergy", "sup |H| exponential bound");
  high->add_option("--M", hM, "resolvent powers")->capture_default_str();
  high->add_option("--rgrid", rgrid, "radii in [1, 8]")->capture_default_str();
  high->add_option("--kgrid", kgrid, "k values in [1, 10]")->capture_default_str();

  ModelOptions mo;
  std::string kind = "vertical", range = "low", eps = "0.4,0.2,0.1,0.05";
  int M = 1, samples = 20;
  double p = 3;
  std::uint64_t seed = 12345;

  auto* l2 = app.add_subcommand("l2const", "L^2 square-function constant on random bumps");
  mo.attach(l2);
  l2->add_option("--kind", kind, "vertical or horizontal")->capture_default_str();
  l2->add_option("--M", M, "resolvent power")->capture_default_str();
  l2->add_option("--samples", samples, "number of random samples")->capture_default_str();
  l2->add_option("--seed", seed, "random seed")->capture_default_str();

  auto* witness = app.add_subcommand("witness", "witness blow-up sweep over eps");
  mo.attach(witness);
  witness->add_option("--kind", kind, "vertical or horizontal")->capture_default_str();
  witness->add_option("--M", M, "resolvent power")->capture_default_str();
  witness->add_option("--p", p, "Lebesgue exponent")->capture_default_str();
  witness->add_option("--eps", eps, "strictly decreasing eps grid")->capture_default_str();
  witness->add_option("--range", range, "low, high or full")->capture_default_str();

  auto* reverse = app.add_subcommand("reverse", "reverse inequality ratio ||f||_p / ||S f||_p");
  mo.attach(reverse);
  reverse->add_option("--M", M, "resolvent power")->capture_default_str();
  reverse->add_option("--p", p, "Lebesgue exponent")->capture_default_str();

  std::string results = "results";
  auto* rep = app.add_subcommand("report", "summarise a results directory");
  rep->add_option("dir", results, "results directory")->capture_default_str();

  auto* model = app.add_subcommand("model", "discrete model utilities");
  auto* dump = model->add_subcommand("dump", "node table as CSV");
  mo.attach(dump);
  model->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto outcome = run_suite(config, out_dir);
      for (const auto& f : outcome.failures) std::cerr << "FAIL " << f << "\n";
      std::cout << report(out_dir);
      return outcome.exit_code;
    }
    if (*bessel) {
      bspec.validate();
      const auto fit = envelope_check(bspec, default_bessel_grid<double>());
      json j = to_json(fit);
      if (!s_grid.empty()) {
        json vals = json::array();
        for (double s : parse_range(s_grid)) vals.push_back({{"s", s}, {"G", bessel_eval(bspec, s)}});
        j["values"] = vals;
      }
      print(j);
      return 0;
    }
    if (*kernels) {
      EndGeometry<double> geom;
      geom.n = kn;
      geom.m = static_cast<int>(torus.size());
      geom.torus_circumferences = torus;
      KernelPoint<double> pt;
      pt.euclid_sep = kd;
      pt.torus_seps.assign(torus.size(), 0.0);
      const auto v = end_kernel(geom, kj, kk, pt);
      json j{{"n", kn}, {"m", geom.m}, {"j", kj}, {"k", kk}, {"d", kd}, {"value", v.value},
             {"grad_euclid", v.grad_euclid}, {"grad_norm", v.grad_norm}, {"shells", v.shells}};
      if (!bound.empty()) {
        const BoundId id = parse_bound_id(bound);
        const bool low = id == BoundId::resolvent_corner || id == BoundId::gradient_corner ||
                         id == BoundId::resolvent_lower_power;
        // torus image sums converge only for k bounded away from 0
        const double k_lo = torus.empty() ? (low ? 0.01 : 0.1) : 0.5;
        const auto kg = low ? log_space<double>(k_lo, 1.0, 4) : log_space<double>(k_lo, 10.0, 4);
        std::vector<KernelPoint<double>> pts;
        for (double d : log_space<double>(0.05, 20.0, 4)) pts.push_back({d, std::vector<double>(torus.size(), 0.0)});
        j["bound"] = to_json(check_bounds(geom, kj, id, kg, pts));
      }
      print(j);
      return 0;
    }
    if (*schur) {
      const auto fam = parse_envelope_family(family);
      json out = json::array();
      for (IntegralId id : family_integrals(fam)) {
        out.push_back(to_json(threshold_scan<double>(fam, id, ni, nj, parse_range(pgrid), r_outer)));
      }
      print(out);
      return 0;
    }
    if (*high) {
      json out = json::array();
      for (int m : parse_int_list(hM)) out.push_back(to_json(h_sup_bound<double>(m, parse_range(rgrid), parse_range(kgrid))));
      print(out);
      return 0;
    }
    if (*l2 || *witness || *reverse || *dump) {
      const SuiteConfig cfg = mo.suite();
      validate_config(cfg);
      const auto mdl = build_model(cfg.model);
      if (*dump) {
        write_model_csv(mdl, std::cout);
        return 0;
      }
      const auto grid = SpectralGrid<double>::for_model(mdl, cfg.grid.k_points_per_decade);
      if (*l2) {
        print(to_json(l2_constant_check(mdl, grid, parse_square_function_kind(kind), M, samples, seed)));
      } else if (*witness) {
        print(to_json(witness_sweep(mdl, grid, M, p, parse_range(eps), parse_square_function_kind(kind),
                                    parse_energy_range(range))));
      } else {
        print(to_json(reverse_check(mdl, grid, M, p, default_reverse_samples(mdl, p))));
      }
      return 0;
    }
    if (*rep) {
      std::cout << report(results);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
