#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "imcf/flow.hpp"
#include "imcf/spectral.hpp"
#include "imcf/verify.hpp"

namespace imcf {

enum class Backend { Curve, Surface };

struct ScenarioConfig {
  Backend backend = Backend::Surface;
  std::string shape = "sphere(1)";
  RadialProfile profile = SphereProfile{1.0};
  int resolution = 3;
  std::string speed = "imcf";
  TimeStepPolicy dt = TimeStepPolicy::cfl(0.2);
  double t_end = 1.0;
  double sample_interval = 0.02;
  std::vector<double> p = {2.0};
  std::optional<double> alpha;  // unset means alpha_max at t = 0
  std::vector<std::string> checks;
  std::map<std::string, double> tolerances;
  std::filesystem::path output = "run";
  std::uint64_t seed = 0;

  int dimension() const { return backend == Backend::Curve ? 1 : 2; }
  void validate() const;
};

// Names accepted in the "checks" list, in report order.
const std::vector<std::string>& check_names();

RadialProfile parse_shape(const std::string& text, std::uint64_t seed);
ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig parse_config(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioConfig& config);

AtlasPtr scenario_atlas(const ScenarioConfig& config);

// Mesh and series IO.
void write_off(const StarSurface& surface, const std::filesystem::path& path);
void write_curve_csv(const StarSurface& surface, const std::filesystem::path& path);
// Reads vertex positions written by write_off / write_curve_csv.
std::vector<Eigen::Vector3d> read_off(const std::filesystem::path& path, std::vector<std::array<int, 3>>* triangles = nullptr);
std::vector<Eigen::Vector3d> read_curve_csv(const std::filesystem::path& path);
// Radii of the positions against the atlas directions; throws data-error
// when a position is not on its atlas ray.
StarSurface surface_from_positions(const AtlasPtr& atlas, const std::vector<Eigen::Vector3d>& positions, double time);

const std::vector<std::string>& series_columns();
void write_series_csv(const FlowTrace& trace, const std::filesystem::path& path);
struct SeriesTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<double> column(const std::string& name) const;
};
SeriesTable read_series_csv(const std::filesystem::path& path);

nlohmann::json to_json(const EigenResult& result);
nlohmann::json to_json(const CheckReport& report);
void write_eigenfunction_csv(const Eigen::VectorXd& u, const std::filesystem::path& path);

std::string format_time(double t);

struct RunArtifact {
  std::filesystem::path directory;
  bool completed = false;
  std::vector<CheckReport> reports;
  std::vector<std::string> flags;
  std::optional<double> abort_time;
  std::string abort_kind;
  std::string abort_message;
  double alpha = kNaN;
  double lambda1_t0 = kNaN;
  double final_mean_radius = kNaN;

  // No check failed; inconclusive rows do not count as failures.
  bool all_pass() const;
};

// 0 all checks pass or are inconclusive, 1 some check failed, 2 aborted.
int exit_code(const RunArtifact& artifact);

RunArtifact run_scenario(const ScenarioConfig& config);

// Re-runs checks on an existing run directory from its config copy,
// snapshots, and series; rewrites report.json and summary.md.
RunArtifact verify_run(const std::filesystem::path& directory, const std::vector<std::string>& checks = {});

struct SweepResult {
  std::vector<RunArtifact> runs;
  std::filesystem::path combined_csv;
};

// parameter in {alpha, p, resolution, dt}; one run directory per value
// under base.output; up to `workers` scenarios at a time.
SweepResult sweep(const ScenarioConfig& base, const std::string& parameter, const std::vector<double>& values,
                  int workers = 1);

// Worker count from IMCF_WORKERS (default 1).
int workers_from_env();

// Writes summary.md next to report.json and returns its path.
std::filesystem::path emit_report(const std::filesystem::path& directory);

}  // namespace imcf
