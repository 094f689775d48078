#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "ends_sqfn/experiments.hpp"

namespace ends_sqfn::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::string join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

const char* kRecordHeader = "experiment_id,config_hash,M,p,eps,range,sample,input_norm,output_norm,ratio,slope\n";

std::string record_row(const ExperimentRecord& r) {
  return join({r.experiment_id, r.config_hash, std::to_string(r.M), fmt(r.p), fmt(r.eps), r.range, r.sample,
               fmt(r.input_norm), fmt(r.output_norm), fmt(r.ratio), fmt(r.slope)});
}

// Lazily built model, spectral grid and the per-experiment output.
struct Context {
  const SuiteConfig& cfg;
  std::string hash;
  std::unique_ptr<ModelManifold<double>> model;
  std::unique_ptr<SpectralGrid<double>> grid;

  const ModelManifold<double>& the_model() {
    if (!model) model = std::make_unique<ModelManifold<double>>(build_model(cfg.model));
    return *model;
  }
  const SpectralGrid<double>& the_grid() {
    if (!grid) grid = std::make_unique<SpectralGrid<double>>(
                   SpectralGrid<double>::for_model(the_model(), cfg.grid.k_points_per_decade));
    return *grid;
  }
};

struct Output {
  std::string csv;
  std::string svg;
};

void run_witness(Context& ctx, const ExperimentConfig& e, ExperimentOutcome& out, Output& files) {
  const auto kind = parse_square_function_kind(e.get("kind", "vertical"));
  const int M = e.integer("M", 1);
  const double p = e.number("p", 0);
  const auto range = parse_energy_range(e.get("range", "low"));
  const auto eps = e.numbers("eps", {0.4, 0.2, 0.1, 0.05});
  auto res = witness_sweep(ctx.the_model(), ctx.the_grid(), M, p, eps, kind, range);
  files.csv = kRecordHeader;
  for (auto& r : res.records) {
    r.experiment_id = e.id;
    r.config_hash = ctx.hash;
    files.csv += record_row(r);
  }
  out.details = to_json(res);
  out.details["kind"] = to_string(kind);
  if (!std::isfinite(res.slope)) out.failures.push_back("slope is not finite");
  if (e.params.count("expect_slope")) {
    const double target = e.number("expect_slope", 0), tol = e.number("slope_tol", 0.1);
    if (!(std::abs(res.slope - target) <= tol)) {
      out.failures.push_back("slope " + fmt(res.slope) + " outside " + fmt(target) + " +- " + fmt(tol));
    }
  }
  if (e.params.count("min_slope")) {
    const double lo = e.number("min_slope", 0);
    if (!(res.slope >= lo)) out.failures.push_back("slope " + fmt(res.slope) + " below " + fmt(lo));
  }
  files.svg = svg_plot(e.id + ": ||S f_eps||_p / ||f_eps||_p", "eps", "ratio",
                       {{std::string(to_string(kind)) + " M=" + std::to_string(M) + " p=" + fmt(p), res.eps_grid,
                         res.ratios}},
                       true, true);
}

void run_reverse(Context& ctx, const ExperimentConfig& e, ExperimentOutcome& out, Output& files) {
  const int M = e.integer("M", 1);
  const double p = e.number("p", 2);
  const auto& model = ctx.the_model();
  auto res = reverse_check(model, ctx.the_grid(), M, p, default_reverse_samples(model, p));

  ModelConfig fine_cfg = ctx.cfg.model;
  fine_cfg.points_per_decade *= 2;
  const auto fine = build_model(fine_cfg);
  const auto fine_grid = SpectralGrid<double>::for_model(fine, 2 * ctx.cfg.grid.k_points_per_decade);
  const auto res_fine = reverse_check(fine, fine_grid, M, p, default_reverse_samples(fine, p));
  const double change = std::abs(res_fine.max_ratio - res.max_ratio) / res.max_ratio;

  files.csv = kRecordHeader;
  for (auto& r : res.records) {
    r.experiment_id = e.id;
    r.config_hash = ctx.hash;
    files.csv += record_row(r);
  }
  out.details = to_json(res);
  out.details["refined"] = to_json(res_fine);
  out.details["refinement_change"] = change;
  if (!std::isfinite(res.max_ratio) || !(res.max_ratio > 0)) out.failures.push_back("max ratio is not finite");
  const double refine_tol = e.number("refine_tol", 0.1);
  if (!(change < refine_tol)) {
    out.failures.push_back("max ratio moved " + fmt(change) + " under refinement (tolerance " + fmt(refine_tol) + ")");
  }
  if (e.params.count("expect_ratio")) {
    const double target = e.number("expect_ratio", 0), tol = e.number("ratio_tol", 0.02);
    for (std::size_t i = 0; i < res.ratios.size(); ++i) {
      if (!(std::abs(res.ratios[i] - target) <= tol * target)) {
        out.failures.push_back(res.names[i] + " ratio " + fmt(res.ratios[i]) + " outside " + fmt(target) + " +- " +
                               fmt(100 * tol) + "%");
      }
    }
  }
  std::vector<double> idx;
  for (std::size_t i = 0; i < res.ratios.size(); ++i) idx.push_back(double(i));
  files.svg = svg_plot(e.id + ": ||f||_p / ||S f||_p per sample", "sample", "ratio",
                       {{"base grid", idx, res.ratios}, {"refined grid", idx, res_fine.ratios}}, false, false);
}

void run_l2const(Context& ctx, const ExperimentConfig& e, ExperimentOutcome& out, Output& files) {
  const auto kind = parse_square_function_kind(e.get("kind", "vertical"));
  const int M = e.integer("M", 1);
  const auto& model = ctx.the_model();
  const auto res = l2_constant_check(model, ctx.the_grid(), kind, M, e.integer("samples", 20),
                                     static_cast<std::uint64_t>(e.integer("seed", 12345)));
  // Resolution of the identity on a fixed bump of the first end.
  const Vector<double> f = cutoff(model, 0, 1.0, 2.0).values - cutoff(model, 0, 10.0, 20.0).values;
  ResolventSolver<double> solver(model);
  const double residual = resolution_identity_residual(solver, ctx.the_grid(), M, f, kind);

  files.csv = "experiment_id,config_hash,kind,M,sample,ratio,expected\n";
  for (std::size_t i = 0; i < res.ratios.size(); ++i) {
    files.csv += join({e.id, ctx.hash, to_string(kind), std::to_string(M), std::to_string(i), fmt(res.ratios[i]),
                       fmt(res.expected)});
  }
  out.details = to_json(res);
  out.details["kind"] = to_string(kind);
  out.details["resolution_identity_residual"] = residual;
  const double tol = e.number("tol", 0.02), rtol = e.number("residual_tol", 0.02);
  if (!(res.worst_rel_error <= tol)) {
    out.failures.push_back("L2 ratio off by " + fmt(res.worst_rel_error) + " (tolerance " + fmt(tol) + ")");
  }
  if (!(residual <= rtol)) {
    out.failures.push_back("resolution identity residual " + fmt(residual) + " (tolerance " + fmt(rtol) + ")");
  }
  std::vector<double> idx, expected;
  for (std::size_t i = 0; i < res.ratios.size(); ++i) idx.push_back(double(i)), expected.push_back(res.expected);
  files.svg = svg_plot(e.id + ": ||S f||_2^2 / ||f||_2^2", "sample", "ratio",
                       {{"measured", idx, res.ratios}, {"spectral constant", idx, expected}}, false, false);
}

void run_schur(Context& ctx, const ExperimentConfig& e, ExperimentOutcome& out, Output& files) {
  const auto family = parse_envelope_family(e.get("family", "h3"));
  const int ni = e.integer("ni", 3), nj = e.integer("nj", 3);
  const auto pgrid = e.numbers("pgrid", {1.5, 2, 3, 4, 5});
  const double r_outer = e.number("r_outer", 1e6), tol = e.number("cutoff_tol", 0.05);
  files.csv = "experiment_id,config_hash,integral,n_i,n_j,p,finite,inconclusive,exponent,value\n";
  out.details = json::array();
  std::vector<PlotSeries> series;
  for (IntegralId id : family_integrals(family)) {
    const auto rep = threshold_scan<double>(family, id, ni, nj, pgrid, r_outer);
    PlotSeries s{to_string(id), {}, {}};
    for (const auto& v : rep.verdicts) {
      files.csv += join({e.id, ctx.hash, to_string(id), std::to_string(ni), std::to_string(nj), fmt(v.p),
                         v.finite ? "1" : "0", v.inconclusive ? "1" : "0", fmt(v.exponent), fmt(v.value)});
      if (std::isfinite(v.exponent)) s.x.push_back(v.p), s.y.push_back(v.exponent);
    }
    series.push_back(s);
    out.details.push_back(to_json(rep));
    const std::string name = to_string(id);
    if (rep.predicted_cutoff) {
      if (!rep.detected_cutoff) {
        out.failures.push_back(name + ": no cutoff detected (predicted " + fmt(*rep.predicted_cutoff) + ")");
      } else if (!(std::abs(*rep.detected_cutoff - *rep.predicted_cutoff) <= tol)) {
        out.failures.push_back(name + ": cutoff " + fmt(*rep.detected_cutoff) + " vs predicted " +
                               fmt(*rep.predicted_cutoff) + " +- " + fmt(tol));
      }
    } else {
      for (const auto& v : rep.verdicts) {
        if (!v.finite) out.failures.push_back(name + ": divergent at p = " + fmt(v.p));
      }
    }
  }
  files.svg = svg_plot(e.id + ": tail exponent vs p (finite below -1)", "p", "tail exponent", series, false, false);
}

void run_highenergy(Context& ctx, const ExperimentConfig& e, ExperimentOutcome& out, Output& files) {
  const auto Ms = parse_int_list(e.get("M", "1,2,3"));
  const auto rgrid = e.numbers("rgrid", {1, 1.5, 2, 3, 4, 5, 6, 7, 8});
  const auto kgrid = e.numbers("kgrid", {1, 2, 3, 5, 7, 10});
  files.csv = "experiment_id,config_hash,M,k,r,sup_H,bound\n";
  out.details = json::array();
  std::vector<PlotSeries> series;
  for (int M : Ms) {
    const auto fit = h_sup_bound<double>(M, rgrid, kgrid);
    PlotSeries s{"M=" + std::to_string(M), {}, {}};
    for (std::size_t j = 0; j < kgrid.size(); ++j) {
      for (std::size_t i = 0; i < rgrid.size(); ++i) {
        files.csv += join({e.id, ctx.hash, std::to_string(M), fmt(kgrid[j]), fmt(rgrid[i]), fmt(fit.sup[j][i]),
                           fmt(fit.C * std::exp(-fit.c * kgrid[j] * rgrid[i]))});
        // k^{2M} sup|H| depends on k r alone
        s.x.push_back(kgrid[j] * rgrid[i]);
        s.y.push_back(std::pow(kgrid[j], 2 * M) * fit.sup[j][i]);
      }
    }
    std::vector<std::size_t> order(s.x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    PlotSeries sorted{s.name, {}, {}};
    for (std::size_t i : order) sorted.x.push_back(s.x[i]), sorted.y.push_back(s.y[i]);
    series.push_back(sorted);

    double support = 0;
    for (double r : {rgrid.front(), rgrid.back()}) {
      for (double k : {kgrid.front(), kgrid.back()}) {
        SplitSpec<double> spec;
        spec.M = M;
        spec.r = r;
        spec.k = k;
        support = std::max(support, hat_h_support_error(spec));
      }
    }
    json j = to_json(fit);
    j["hat_h_support_error"] = support;
    out.details.push_back(j);
    const std::string tag = "M=" + std::to_string(M);
    if (!fit.pass) out.failures.push_back(tag + ": fit failed (c = " + fmt(fit.c) + ", residual = " + fmt(fit.residual) + ")");
    if (!(support <= 1e-10)) out.failures.push_back(tag + ": hat H support error " + fmt(support));
  }
  files.svg = svg_plot(e.id + ": k^{2M} sup|H| vs k r", "k r", "k^{2M} sup|H|", series, false, true);
}

void run_bessel(Context&, const ExperimentConfig& e, ExperimentOutcome& out, Output& files) {
  BesselSpec<double> spec;
  spec.a = e.number("a", 2);
  spec.d = e.number("d", 3);
  const auto grid = default_bessel_grid<double>();
  const auto fit = envelope_check(spec, grid);
  files.csv = "experiment_id,a,d,s,G,upper_envelope,lower_envelope\n";
  PlotSeries g{"G", {}, {}}, up{"upper", {}, {}}, lo{"lower", {}, {}};
  for (double s : grid) {
    const double v = bessel_eval(spec, s);
    const double u = fit.C_upper * std::exp(bessel_log_envelope(spec, s, fit.c_upper));
    const double l = fit.C_lower * std::exp(bessel_log_envelope(spec, s, fit.c_lower));
    files.csv += join({e.id, fmt(spec.a), fmt(spec.d), fmt(s), fmt(v), fmt(u), fmt(l)});
    g.x.push_back(s), g.y.push_back(v);
    up.x.push_back(s), up.y.push_back(u);
    lo.x.push_back(s), lo.y.push_back(l);
  }
  out.details = to_json(fit);
  if (fit.max_violation != 0) out.failures.push_back("envelope violated by " + fmt(fit.max_violation));
  files.svg = svg_plot(e.id + ": Bessel potential kernel and envelopes", "s", "G", {g, up, lo}, true, true);
}

json model_info(Context& ctx) {
  json j{{"ends", ctx.cfg.model.ends},
         {"r_min", ctx.cfg.model.r_min},
         {"r_max", ctx.cfg.model.r_max},
         {"points_per_decade", ctx.cfg.model.points_per_decade},
         {"k_points_per_decade", ctx.cfg.grid.k_points_per_decade}};
  if (ctx.model) {
    j["nodes"] = ctx.model->size();
    j["hub_measure"] = ctx.model->hub_measure();
    j["h_min"] = ctx.model->h_min();
    j["n_min"] = ctx.model->n_min();
  }
  if (ctx.grid) {
    j["k_lo"] = ctx.grid->k_lo();
    j["k_hi"] = ctx.grid->k_hi();
    j["k_nodes"] = ctx.grid->nodes().size();
  }
  return j;
}

}  // namespace

SuiteOutcome run_suite(const fs::path& config_path, const fs::path& out_dir) {
  return run_suite(load_config(config_path), out_dir, config_path.string());
}

SuiteOutcome run_suite(const SuiteConfig& cfg, const fs::path& out_dir, const std::string& config_label) {
  validate_config(cfg);
  fs::create_directories(out_dir);
  const std::string started = utc_now();
  Context ctx{cfg, hex64(cfg.hash), nullptr, nullptr};

  SuiteOutcome suite;
  json experiments = json::array();
  for (const auto& e : cfg.experiments) {
    ExperimentOutcome out;
    out.id = e.id;
    out.type = e.type;
    Output files;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (e.type == "witness") run_witness(ctx, e, out, files);
      else if (e.type == "reverse") run_reverse(ctx, e, out, files);
      else if (e.type == "l2const") run_l2const(ctx, e, out, files);
      else if (e.type == "schur") run_schur(ctx, e, out, files);
      else if (e.type == "highenergy") run_highenergy(ctx, e, out, files);
      else if (e.type == "bessel") run_bessel(ctx, e, out, files);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& err) {
      out.failures.push_back(std::string("error: ") + err.what());
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.pass = out.failures.empty();
    if (!files.csv.empty()) write_text(out_dir / (e.id + ".csv"), files.csv);
    if (!files.svg.empty()) write_text(out_dir / (e.id + ".svg"), files.svg);
    for (const auto& f : out.failures) suite.failures.push_back(e.id + ": " + f);
    json params(e.params);
    experiments.push_back({{"id", e.id},
                           {"type", e.type},
                           {"pass", out.pass},
                           {"wall_seconds", out.wall_seconds},
                           {"parameters", params},
                           {"failures", out.failures},
                           {"details", out.details}});
    suite.experiments.push_back(std::move(out));
  }
  suite.exit_code = suite.failures.empty() ? 0 : 1;

  json manifest{{"tool", "ends-sqfn"},
                {"version", kVersion},
                {"config", config_label},
                {"config_hash", ctx.hash},
                {"started_utc", started},
                {"finished_utc", utc_now()},
                {"model", model_info(ctx)},
                {"experiments", experiments},
                {"failures", suite.failures},
                {"exit_code", suite.exit_code}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return suite;
}

std::string report(const fs::path& results_dir) {
  const fs::path path = results_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw ConfigError("no manifest at '" + path.string() + "'");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ConfigError("unreadable manifest: " + std::string(e.what()));
  }
  std::ostringstream os;
  os << "config " << m.value("config", "?") << " (hash " << m.value("config_hash", "?") << "), version "
     << m.value("version", "?") << ", finished " << m.value("finished_utc", "?") << "\n";
  for (const auto& e : m["experiments"]) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-28s %-11s %s  %8.2fs\n", e.value("id", "").c_str(),
                  e.value("type", "").c_str(), e.value("pass", false) ? "PASS" : "FAIL", e.value("wall_seconds", 0.0));
    os << line;
    for (const auto& f : e["failures"]) os << "      - " << f.get<std::string>() << "\n";
  }
  const auto& failures = m["failures"];
  os << (failures.empty() ? "all contracts pass" : std::to_string(failures.size()) + " contract failure(s)") << "\n";
  return os.str();
}

}  // namespace ends_sqfn::experiments
