#pragma once

// Experiment orchestration: witness sweeps, reverse-inequality checks, L^2
// constants and the configured suite runner. Compiled library (src/).

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ends_sqfn/bessel.hpp"
#include "ends_sqfn/end_kernels.hpp"
#include "ends_sqfn/highenergy.hpp"
#include "ends_sqfn/radial_model.hpp"
#include "ends_sqfn/schur_verifier.hpp"
#include "ends_sqfn/sqfn_engine.hpp"

namespace ends_sqfn::experiments {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration

struct ModelConfig {
  std::vector<int> ends{3, 4};
  double r_min = 1;
  double r_max = 1e9;
  int points_per_decade = 64;
};

struct GridConfig {
  int k_points_per_decade = 32;
};

struct ExperimentConfig {
  std::string id;
  std::string type;
  std::map<std::string, std::string> params;

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
};

struct SuiteConfig {
  ModelConfig model;
  GridConfig grid;
  std::vector<ExperimentConfig> experiments;
  std::uint64_t hash = 0;  // FNV-1a of the raw config text
};

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// INI text with sections [model], [grid] and [experiments.<id>].
SuiteConfig parse_config(const std::string& text);
SuiteConfig load_config(const std::filesystem::path& path);

/// Checks every experiment's parameters without solving anything.
void validate_config(const SuiteConfig& cfg);

ModelManifold<double> build_model(const ModelConfig& cfg);

/// "a:b[:step]" (inclusive) or a comma list.
std::vector<double> parse_range(const std::string& spec);
std::vector<int> parse_int_list(const std::string& spec);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentRecord {
  std::string experiment_id;
  std::string config_hash;
  int M = 0;
  double p = 0;
  double eps = 0;  // 0 when not applicable
  std::string range;
  std::string sample;
  double input_norm = 0;
  double output_norm = 0;
  double ratio = 0;
  double slope = 0;
  double wall_seconds = 0;
};

struct SweepResult {
  std::vector<double> eps_grid;
  std::vector<double> ratios;
  double slope = 0;
  double slope_stderr = 0;
  std::vector<ExperimentRecord> records;
};

/// Witness blow-up sweep on the end of least dimension. `range` is normally
/// the low-energy part. Refuses truncated eps and, for the vertical kind,
/// 2M >= n_min.
SweepResult witness_sweep(const ModelManifold<double>& model, const SpectralGrid<double>& grid, int M, double p,
                          const std::vector<double>& eps_grid, SquareFunctionKind kind,
                          EnergyRange range = EnergyRange::low);

struct NamedFunction {
  std::string name;
  Vector<double> values;
};

/// Oscillatory, bump and witness-type samples supported away from the Dirichlet boundary.
std::vector<NamedFunction> default_reverse_samples(const ModelManifold<double>& model, double p);

struct ReverseResult {
  double max_ratio = 0;
  std::vector<std::string> names;
  std::vector<double> ratios;  // ||f||_p / ||S f||_p per sample (zero samples skipped)
  std::vector<ExperimentRecord> records;
};

ReverseResult reverse_check(const ModelManifold<double>& model, const SpectralGrid<double>& grid, int M, double p,
                            const std::vector<NamedFunction>& samples);

struct L2Result {
  double expected = 0;
  double worst_rel_error = 0;
  std::vector<double> ratios;
};

/// ||S f||_2^2 / ||f||_2^2 over `samples` seeded random bumps supported in r <= 100.
L2Result l2_constant_check(const ModelManifold<double>& model, const SpectralGrid<double>& grid,
                           SquareFunctionKind kind, int M, int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const EnvelopeFit<double>& fit);
nlohmann::json to_json(const BoundReport<double>& rep);
nlohmann::json to_json(const ThresholdReport<double>& rep);
nlohmann::json to_json(const HSupFit<double>& fit);
nlohmann::json to_json(const SweepResult& res);
nlohmann::json to_json(const ReverseResult& res);
nlohmann::json to_json(const L2Result& res);

/// Fixed-format number text used in every CSV cell.
std::string fmt(double v);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

/// Static SVG line plot; log axes take log10 of the data.
std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<PlotSeries>& series, bool log_x, bool log_y);

// ---------------------------------------------------------------------------
// Suite

struct ExperimentOutcome {
  std::string id;
  std::string type;
  bool pass = false;
  double wall_seconds = 0;
  std::vector<std::string> failures;
  nlohmann::json details;
};

struct SuiteOutcome {
  int exit_code = 0;
  std::vector<ExperimentOutcome> experiments;
  std::vector<std::string> failures;
};

/// Runs every configured experiment in file order, writing <id>.csv, <id>.svg
/// and manifest.json into `out_dir`. Exit code 0 iff every contract passes.
/// Throws ConfigError before any solve when the config is invalid.
SuiteOutcome run_suite(const std::filesystem::path& config_path, const std::filesystem::path& out_dir);
SuiteOutcome run_suite(const SuiteConfig& cfg, const std::filesystem::path& out_dir,
                       const std::string& config_label = "<memory>");

/// Human-readable summary of a results directory (reads manifest.json).
std::string report(const std::filesystem::path& results_dir);

}  // namespace ends_sqfn::experiments
