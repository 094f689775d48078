#include <cmath>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "ends_sqfn/experiments.hpp"

using namespace ends_sqfn;
using namespace ends_sqfn::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("ends_sqfn_unit_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelManifold<double> small_model() {
  ModelConfig c;
  c.r_max = 1e6;
  c.points_per_decade = 32;
  return build_model(c);
}

}  // namespace

TEST_CASE("hash and number formatting") {
  // FNV-1a 64-bit reference values
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
  CHECK(fmt(0.1) == "0.1");
  CHECK(fmt(1.0 / 3) == "0.3333333333");
  CHECK(fmt(1e-20) == "1e-20");
  CHECK(fmt(INFINITY) == "inf");
}

TEST_CASE("number lists") {
  CHECK(parse_range("1:2:0.25") == std::vector<double>{1, 1.25, 1.5, 1.75, 2});
  CHECK(parse_range("1:3") == std::vector<double>{1, 2, 3});
  CHECK(parse_range(" 0.4, 0.2 ,0.1") == std::vector<double>{0.4, 0.2, 0.1});
  CHECK(parse_int_list("3,4") == std::vector<int>{3, 4});
  CHECK_THROWS_AS(parse_range(""), ConfigError);
  CHECK_THROWS_AS(parse_range("3:1"), ConfigError);
  CHECK_THROWS_AS(parse_range("1,x"), ConfigError);
  CHECK_THROWS_AS(parse_int_list("1.5"), ConfigError);
}

TEST_CASE("config parsing") {
  const std::string text =
      "; comment\n[model]\nends = 3,5\nr_max = 1e7\npoints_per_decade = 48\n\n[grid]\nk_points_per_decade = 16\n\n"
      "[experiments.a]\ntype = witness\nM = 1\np = 2\neps = 0.4,0.3,0.2,0.1\n\n[experiments.b]\ntype = schur\nfamily = w1\n";
  const auto cfg = parse_config(text);
  CHECK(cfg.model.ends == std::vector<int>{3, 5});
  CHECK(cfg.model.r_max == 1e7);
  CHECK(cfg.model.points_per_decade == 48);
  CHECK(cfg.grid.k_points_per_decade == 16);
  REQUIRE(cfg.experiments.size() == 2);
  CHECK(cfg.experiments[0].id == "a");
  CHECK(cfg.experiments[0].type == "witness");
  CHECK(cfg.experiments[0].number("p", 0) == 2);
  CHECK(cfg.experiments[1].get("family", "") == "w1");
  CHECK(cfg.hash == fnv1a(text));
  CHECK_NOTHROW(validate_config(cfg));

  CHECK_THROWS_AS(parse_config("[bogus]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\ncolour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiments.a]\nM = 1\n"), ConfigError);  // no type
  CHECK_THROWS_AS(parse_config("x = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/suite.cfg"), ConfigError);
}

TEST_CASE("validation happens before any solve") {
  auto check_rejected = [](const std::string& body) {
    const auto cfg = parse_config("[model]\nends = 3,4\n\n" + body);
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    const fs::path out = scratch("rejected");
    CHECK_THROWS_AS(run_suite(cfg, out), ConfigError);
    CHECK_FALSE(fs::exists(out / "manifest.json"));
  };
  // 2M >= n_min for the vertical witness
  check_rejected("[experiments.w]\ntype = witness\nkind = vertical\nM = 2\np = 3\n");
  // eps below the truncation guard for r_max = 1e9
  check_rejected("[experiments.w]\ntype = witness\nM = 1\np = 3\neps = 0.4,0.2,0.1,0.04\n");
  check_rejected("[experiments.w]\ntype = witness\nM = 1\np = 3\neps = 0.4,0.1,0.2,0.05\n");
  check_rejected("[experiments.w]\ntype = witness\nM = 1\np = 3\neps = 0.4,0.2,0.1\n");
  check_rejected("[experiments.w]\ntype = witness\nM = 1\np = 3\nexpect = 1\n");
  check_rejected("[experiments.r]\ntype = reverse\np = 3\n");
  check_rejected("[experiments.s]\ntype = schur\nfamily = h9\n");
  check_rejected("[experiments.h]\ntype = highenergy\nrgrid = 0.5,2\n");
  check_rejected("[experiments.x]\ntype = nonsense\n");
  CHECK_THROWS_AS(validate_config(parse_config("[model]\nends = 2,4\n")), ConfigError);
}

TEST_CASE("empty suite") {
  const fs::path out = scratch("empty");
  const auto res = run_suite(parse_config("[model]\nends = 3,4\n"), out);
  CHECK(res.exit_code == 0);
  CHECK(res.experiments.empty());
  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(m["experiments"].empty());
  CHECK(m["failures"].empty());
  CHECK(m["exit_code"] == 0);
  CHECK(m["version"] == kVersion);
  CHECK(report(out).find("all contracts pass") != std::string::npos);
}

TEST_CASE("failing contract gives exit code 1 and a failure list") {
  const fs::path out = scratch("fail");
  const auto cfg = parse_config(
      "[model]\nends = 3,4\nr_max = 1e6\npoints_per_decade = 32\n\n"
      "[experiments.w]\ntype = witness\nkind = horizontal\nM = 2\np = 4\neps = 0.6,0.5,0.4,0.3\n"
      "expect_slope = 5\nslope_tol = 0.1\n");
  const auto res = run_suite(cfg, out);
  CHECK(res.exit_code == 1);
  REQUIRE(res.failures.size() == 1);
  CHECK(res.failures[0].rfind("w: slope", 0) == 0);
  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(m["failures"].size() == 1);
  CHECK(m["experiments"][0]["pass"] == false);
  const std::string csv = slurp(out / "w.csv");
  CHECK(csv.rfind("experiment_id,config_hash,M,p,eps,range,sample,input_norm,output_norm,ratio,slope\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(slurp(out / "w.svg").find("<polyline") != std::string::npos);
}

TEST_CASE("witness sweep") {
  const auto model = small_model();
  const auto grid = SpectralGrid<double>::for_model(model, 16);
  const std::vector<double> eps{0.6, 0.5, 0.4, 0.3};
  const auto res = witness_sweep(model, grid, 1, 2.0, eps, SquareFunctionKind::vertical);
  REQUIRE(res.ratios.size() == 4);
  CHECK(std::isfinite(res.slope));
  // slope is the least-squares fit of log ratio against log(1/eps)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double x = std::log(1 / eps[i]), y = std::log(res.ratios[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  CHECK(res.slope == doctest::Approx((4 * sxy - sx * sy) / (4 * sxx - sx * sx)).epsilon(1e-10));
  for (const auto& r : res.records) CHECK(r.ratio == doctest::Approx(r.output_norm / r.input_norm).epsilon(1e-14));

  CHECK_THROWS_AS(witness_sweep(model, grid, 2, 3.0, eps, SquareFunctionKind::vertical), DomainError);
  CHECK_THROWS_AS(witness_sweep(model, grid, 1, 3.0, {0.6, 0.5, 0.4}, SquareFunctionKind::vertical), DomainError);
  CHECK_THROWS_AS(witness_sweep(model, grid, 1, 3.0, {0.6, 0.5, 0.4, 0.05}, SquareFunctionKind::vertical),
                  DomainError);
}

TEST_CASE("reverse check") {
  const auto model = small_model();
  const auto grid = SpectralGrid<double>::for_model(model, 16);
  auto samples = default_reverse_samples(model, 2.0);
  samples.push_back({"zero", Vector<double>::Zero(model.size())});
  const auto res = reverse_check(model, grid, 1, 2.0, samples);
  CHECK(res.names.size() == 3);  // zero sample skipped
  for (double r : res.ratios) CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
  // samples stay clear of the Dirichlet boundary
  for (const auto& s : samples) {
    for (Eigen::Index v = 0; v < model.size(); ++v) {
      if (model.boundary_node(v)) CHECK(s.values(v) == 0.0);
    }
  }
}

TEST_CASE("L2 constant check is seeded") {
  const auto model = small_model();
  const auto grid = SpectralGrid<double>::for_model(model, 16);
  const auto a = l2_constant_check(model, grid, SquareFunctionKind::horizontal, 2, 4, 77);
  const auto b = l2_constant_check(model, grid, SquareFunctionKind::horizontal, 2, 4, 77);
  CHECK(a.ratios == b.ratios);
  CHECK(a.expected == doctest::Approx(1.0 / 12));
  CHECK(a.worst_rel_error < 0.01);
}

TEST_CASE("svg plot") {
  const auto svg = svg_plot("t<1>", "x", "y", {{"s", {1, 10, 100}, {1, 0.1, 0.01}}}, true, true);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("t&lt;1&gt;") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 5);
  // empty series still yields a valid document
  CHECK(svg_plot("e", "x", "y", {}, false, false).find("</svg>") != std::string::npos);
}
