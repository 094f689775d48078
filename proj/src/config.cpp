#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ends_sqfn/experiments.hpp"

namespace ends_sqfn::experiments {

namespace pt = boost::property_tree;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + s + "'");
  }
}

int to_int(const std::string& key, const std::string& s) {
  const double v = to_double(key, s);
  if (v != std::floor(v)) throw ConfigError("'" + key + "': expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

void check_keys(const std::string& where, const pt::ptree& sec, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : sec) {
    if (!allowed.count(key)) throw ConfigError("[" + where + "]: unknown key '" + key + "'");
  }
}

}  // namespace

std::string ExperimentConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::string ExperimentConfig::require(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw ConfigError("[experiments." + id + "]: missing key '" + key + "'");
  return it->second;
}

double ExperimentConfig::number(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : to_double(key, it->second);
}

int ExperimentConfig::integer(const std::string& key, int fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : to_int(key, it->second);
}

std::vector<double> ExperimentConfig::numbers(const std::string& key, const std::vector<double>& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : parse_range(it->second);
}

std::vector<double> parse_range(const std::string& spec) {
  std::string s = boost::algorithm::trim_copy(spec);
  if (s.empty()) throw ConfigError("empty number list");
  std::vector<std::string> parts;
  if (s.find(':') != std::string::npos) {
    boost::algorithm::split(parts, s, boost::is_any_of(":"));
    if (parts.size() < 2 || parts.size() > 3) throw ConfigError("range '" + s + "': expected a:b or a:b:step");
    const double a = to_double(s, boost::algorithm::trim_copy(parts[0]));
    const double b = to_double(s, boost::algorithm::trim_copy(parts[1]));
    const double step = parts.size() == 3 ? to_double(s, boost::algorithm::trim_copy(parts[2])) : 1.0;
    if (!(step > 0) || !(b >= a)) throw ConfigError("range '" + s + "': need a <= b and step > 0");
    std::vector<double> out;
    const int n = static_cast<int>(std::floor((b - a) / step + 1e-9));
    for (int i = 0; i <= n; ++i) out.push_back(a + step * i);
    return out;
  }
  boost::algorithm::split(parts, s, boost::is_any_of(","));
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(to_double(s, boost::algorithm::trim_copy(p)));
  return out;
}

std::vector<int> parse_int_list(const std::string& spec) {
  std::vector<int> out;
  for (double v : parse_range(spec)) {
    if (v != std::floor(v)) throw ConfigError("'" + spec + "': expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

SuiteConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  SuiteConfig cfg;
  cfg.hash = fnv1a(text);
  std::set<std::string> seen;
  for (const auto& [name, sec] : tree) {
    if (!sec.data().empty()) throw ConfigError("config: key '" + name + "' outside any section");
    if (name == "model") {
      check_keys(name, sec, {"ends", "r_min", "r_max", "points_per_decade"});
      if (auto v = sec.get_optional<std::string>("ends")) cfg.model.ends = parse_int_list(*v);
      if (auto v = sec.get_optional<std::string>("r_min")) cfg.model.r_min = to_double("r_min", *v);
      if (auto v = sec.get_optional<std::string>("r_max")) cfg.model.r_max = to_double("r_max", *v);
      if (auto v = sec.get_optional<std::string>("points_per_decade")) {
        cfg.model.points_per_decade = to_int("points_per_decade", *v);
      }
    } else if (name == "grid") {
      check_keys(name, sec, {"k_points_per_decade"});
      if (auto v = sec.get_optional<std::string>("k_points_per_decade")) {
        cfg.grid.k_points_per_decade = to_int("k_points_per_decade", *v);
      }
    } else if (boost::algorithm::starts_with(name, "experiments.")) {
      ExperimentConfig e;
      e.id = name.substr(std::string("experiments.").size());
      if (e.id.empty() || e.id.find_first_of("/\\ ") != std::string::npos) {
        throw ConfigError("[" + name + "]: invalid experiment id");
      }
      if (!seen.insert(e.id).second) throw ConfigError("[" + name + "]: duplicate experiment");
      for (const auto& [key, val] : sec) e.params[key] = boost::algorithm::trim_copy(val.data());
      e.type = e.require("type");
      cfg.experiments.push_back(std::move(e));
    } else {
      throw ConfigError("config: unknown section [" + name + "]");
    }
  }
  return cfg;
}

SuiteConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ModelManifold<double> build_model(const ModelConfig& cfg) {
  std::vector<EndProfile<double>> ends;
  for (int n : cfg.ends) ends.push_back({n, cfg.r_min, cfg.r_max, cfg.points_per_decade});
  try {
    return ends_sqfn::build_model<double>(ends);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("[model]: ") + e.what());
  }
}

namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"witness", {"type", "kind", "M", "p", "eps", "range", "expect_slope", "slope_tol", "min_slope"}},
      {"reverse", {"type", "M", "p", "expect_ratio", "ratio_tol", "refine_tol"}},
      {"l2const", {"type", "kind", "M", "samples", "seed", "tol", "residual_tol"}},
      {"schur", {"type", "family", "ni", "nj", "pgrid", "r_outer", "cutoff_tol"}},
      {"highenergy", {"type", "M", "rgrid", "kgrid"}},
      {"bessel", {"type", "a", "d"}},
  };
  return keys;
}

}  // namespace

void validate_config(const SuiteConfig& cfg) {
  if (cfg.model.ends.empty()) throw ConfigError("[model]: ends must not be empty");
  build_model(cfg.model);
  int n_min = 1 << 30;
  for (int n : cfg.model.ends) n_min = std::min(n_min, n);
  if (cfg.grid.k_points_per_decade < 4) throw ConfigError("[grid]: k_points_per_decade must be >= 4");

  for (const auto& e : cfg.experiments) {
    const std::string where = "[experiments." + e.id + "]";
    auto it = allowed_keys().find(e.type);
    if (it == allowed_keys().end()) throw ConfigError(where + ": unknown type '" + e.type + "'");
    for (const auto& [key, _] : e.params) {
      if (!it->second.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
    try {
      if (e.type == "witness") {
        const auto kind = parse_square_function_kind(e.get("kind", "vertical"));
        const int M = e.integer("M", 1);
        const double p = e.number("p", 0);
        const auto eps = e.numbers("eps", {0.4, 0.2, 0.1, 0.05});
        if (M < 1 || (kind == SquareFunctionKind::horizontal && M < 2)) throw ConfigError(where + ": invalid M");
        if (kind == SquareFunctionKind::vertical && 2 * M >= n_min) {
          throw ConfigError(where + ": vertical witness needs 2M < n_min (M = " + std::to_string(M) +
                            ", n_min = " + std::to_string(n_min) + ")");
        }
        if (!(p > 1) || p > 20) throw ConfigError(where + ": p must lie in (1, 20]");
        if (eps.size() < 4) throw ConfigError(where + ": eps grid needs >= 4 points");
        for (std::size_t i = 0; i < eps.size(); ++i) {
          if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError(where + ": eps grid must strictly decrease");
          if (witness_truncated(n_min, eps[i], cfg.model.r_max)) {
            throw ConfigError(where + ": eps = " + fmt(eps[i]) + " is below the truncation guard for r_max");
          }
        }
        parse_energy_range(e.get("range", "low"));
      } else if (e.type == "reverse") {
        const double p = e.number("p", 2);
        const double lo = n_min / (n_min - 1.0);
        if (!(p > lo) || !(p < n_min)) throw ConfigError(where + ": p must lie in (n_min', n_min)");
        if (e.integer("M", 1) < 1) throw ConfigError(where + ": invalid M");
      } else if (e.type == "l2const") {
        const auto kind = parse_square_function_kind(e.get("kind", "vertical"));
        const int M = e.integer("M", 1);
        if (M < 1 || (kind == SquareFunctionKind::horizontal && M < 2)) throw ConfigError(where + ": invalid M");
        if (e.integer("samples", 20) < 1) throw ConfigError(where + ": samples must be positive");
      } else if (e.type == "schur") {
        parse_envelope_family(e.get("family", "h3"));
        for (double p : e.numbers("pgrid", {2})) {
          if (!(p > 1) || p > 20) throw ConfigError(where + ": pgrid must lie in (1, 20]");
        }
        if (e.number("r_outer", 1e6) < 1e6) throw ConfigError(where + ": r_outer must be >= 1e6");
      } else if (e.type == "highenergy") {
        for (int M : parse_int_list(e.get("M", "1,2,3"))) {
          if (M < 1 || M > 4) throw ConfigError(where + ": M must lie in 1..4");
        }
        for (double r : e.numbers("rgrid", {1})) {
          if (r < 1 || r > 8) throw ConfigError(where + ": rgrid must lie in [1, 8]");
        }
        for (double k : e.numbers("kgrid", {1})) {
          if (k < 1 || k > 10) throw ConfigError(where + ": kgrid must lie in [1, 10]");
        }
      } else if (e.type == "bessel") {
        BesselSpec<double> s;
        s.a = e.number("a", 2);
        s.d = e.number("d", 3);
        s.validate();
      }
    } catch (const DomainError& err) {
      throw ConfigError(where + ": " + err.what());
    }
  }
}

}  // namespace ends_sqfn::experiments
