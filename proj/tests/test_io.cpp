#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "imcf/io.hpp"
#include "support.hpp"

using namespace imcf;
using imcf::testing::kind_of;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("imcf_test_io_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error_text(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    return e.what();
  }
  return "";
}

ScenarioConfig small(const std::string& shape, double t_end, const fs::path& out) {
  ScenarioConfig c = parse_config(json{{"shape", shape}, {"t_end", t_end}, {"resolution", 2}});
  c.output = out;
  return c;
}

const CheckReport& find(const RunArtifact& a, const std::string& name) {
  for (const auto& r : a.reports)
    if (r.name == name) return r;
  FAIL("missing check " << name);
  return a.reports.front();
}

}  // namespace

TEST_CASE("minimal config gets defaults") {
  const ScenarioConfig c = parse_config(json{{"backend", "surface"}, {"shape", "sphere(1)"}, {"t_end", 1}});
  CHECK(c.backend == Backend::Surface);
  CHECK(c.speed == "imcf");
  CHECK(c.dt.mode == TimeStepPolicy::Mode::Cfl);
  CHECK(c.dt.value == 0.2);
  CHECK(c.sample_interval == doctest::Approx(0.02));
  CHECK(c.checks.empty());
  CHECK(c.p == std::vector<double>{2.0});
  CHECK_FALSE(c.alpha.has_value());
  CHECK(c.resolution == 3);
  CHECK(std::get<SphereProfile>(c.profile).radius == 1.0);
  CHECK(parse_config(json{{"backend", "curve"}}).resolution == 256);
}

TEST_CASE("config constraint violations name the field and bound") {
  const std::string alpha = config_error_text(json{{"shape", "sphere(1)"}, {"alpha", 1.5}});
  CHECK(alpha.find("alpha") != std::string::npos);
  CHECK(alpha.find("2/n") != std::string::npos);
  CHECK(alpha.find("1]") != std::string::npos);
  CHECK(*parse_config(json{{"alpha", 1.0}}).alpha == 1.0);
  CHECK(*parse_config(json{{"backend", "curve"}, {"alpha", 2.0}}).alpha == 2.0);
  CHECK_FALSE(parse_config(json{{"alpha", "auto"}}).alpha.has_value());

  CHECK(config_error_text(json{{"t_end", 1}, {"colour", "red"}}).find("'colour'") != std::string::npos);
  CHECK(config_error_text(json{{"t_end", -1}}).find("t_end") != std::string::npos);
  CHECK(config_error_text(json{{"t_end", 1}, {"sample_interval", 2}}).find("sample_interval") != std::string::npos);
  CHECK(config_error_text(json{{"dt", 1e-3}, {"cfl", 0.1}}).find("either") != std::string::npos);
  CHECK(config_error_text(json{{"checks", {"monotone", "nope"}}}).find("'nope'") != std::string::npos);
  CHECK(config_error_text(json{{"tolerances", {{"nope", 1.0}}}}).find("'nope'") != std::string::npos);
  CHECK(config_error_text(json{{"tolerances", {{"rounding", 1.0}}}}).find("rounding") != std::string::npos);
  CHECK(config_error_text(json{{"p", {2, 1}}}).find("p values") != std::string::npos);
  CHECK(config_error_text(json{{"speed", "fast"}}).find("speed") != std::string::npos);
  CHECK(config_error_text(json{{"shape", "torus(1,2)"}}).find("torus") != std::string::npos);
  CHECK(config_error_text(json{{"shape", "sphere(x)"}}).find("'x'") != std::string::npos);
  CHECK(config_error_text(json{{"backend", "volume"}}).find("backend") != std::string::npos);
  CHECK(config_error_text(json{{"resolution", 9}}).find("resolution") != std::string::npos);
  CHECK(config_error_text(json::array()).find("object") != std::string::npos);

  const fs::path dir = scratch("bad_json");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << "{\"t_end\": ";
  CHECK(kind_of([&] { parse_config(dir / "c.json"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { parse_config(dir / "absent.json"); }) == ErrorKind::ConfigError);
}

TEST_CASE("shape strings and objects") {
  const auto e = std::get<EllipsoidProfile>(parse_shape("ellipsoid(1.5, 1, 1)", 0));
  CHECK(e.a == 1.5);
  CHECK(e.c == 1.0);
  CHECK(std::get<EllipsoidProfile>(parse_shape("ellipse(1.3,1)", 0)).b == 1.0);
  const auto p = std::get<PerturbedSphereProfile>(parse_shape("perturbed(1,0.1,7)", 3));
  CHECK(p.amplitude == 0.1);
  CHECK(p.seed == 7);
  CHECK(std::get<PerturbedSphereProfile>(parse_shape("perturbed(1,0.1)", 3)).seed == 3);
  CHECK(kind_of([] { parse_shape("perturbed(1,0.1,2.5)", 0); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_shape("ellipsoid(1)", 0); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_shape("sphere", 0); }) == ErrorKind::ConfigError);

  const ScenarioConfig c = parse_config(json{{"shape", {{"kind", "ellipsoid"}, {"a", 2}, {"b", 1}, {"c", 0.5}}}});
  CHECK(std::get<EllipsoidProfile>(c.profile).c == 0.5);
}

TEST_CASE("p list configures one eigenvalue series per exponent") {
  const ScenarioConfig c = parse_config(json{{"p", {2, 3}}});
  CHECK(c.p == std::vector<double>{2.0, 3.0});
  CHECK(parse_config(json{{"p", 1.5}}).p == std::vector<double>{1.5});

  ScenarioConfig run = small("ellipsoid(1.2,1,1)", 0.1, scratch("p_list"));
  run.resolution = 1;
  run.p = {2.0, 3.0};
  run.sample_interval = 0.05;
  run.checks = {"monotone"};
  const RunArtifact a = run_scenario(run);
  const SeriesTable t = read_series_csv(a.directory / "series.csv");
  CHECK(t.columns.back() == "lambda1_p3_rescaled");
  const auto l2 = t.column("lambda1"), l3 = t.column("lambda1_p3"), lp = t.column("lambda1_p");
  REQUIRE(l2.size() == 3);
  for (std::size_t k = 0; k < l2.size(); ++k) {
    CHECK(l2[k] > 0.0);
    CHECK(l3[k] > 0.0);
    CHECK(lp[k] == l3[k]);
  }
  const CheckReport& m = find(a, "monotone");
  CHECK(m.details.count("p2.margin") == 1);
  CHECK(m.details.count("p3.margin") == 1);
  CHECK(m.margin == std::min(m.details.at("p2.margin"), m.details.at("p3.margin")));
}

TEST_CASE("config copy round trips") {
  ScenarioConfig c = parse_config(json{{"backend", "curve"}, {"shape", "perturbed(1,0.05,4)"}, {"dt", 1e-5}, {"t_end", 0.3},
                                       {"p", {2, 1.5}}, {"alpha", 0.4}, {"checks", {"monotone", "rounding"}},
                                       {"tolerances", {{"monotone", 1e-3}}}, {"output", "somewhere"}, {"seed", 9}});
  const ScenarioConfig back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.dt.mode == TimeStepPolicy::Mode::Fixed);
  CHECK(back.tolerances.at("monotone") == 1e-3);
  CHECK(back.seed == 9);
}

TEST_CASE("series csv keeps the fixed columns and round trips") {
  CHECK(series_columns() == std::vector<std::string>{"t", "area", "H_min", "H_max", "pinch_margin", "eps_t", "lambda1",
                                                     "lambda1_p", "lambda1_rescaled", "decay_bound",
                                                     "rescaled_monotone_q", "sphericity"});
  FlowTrace trace;
  for (int k = 0; k < 3; ++k) {
    FlowSample s;
    s.t = 0.1 * k;
    s.area = 1.0 / 3.0 + k;
    s.h_min = std::numbers::pi;
    if (k != 1) s.extra["lambda1_p3"] = std::exp(-static_cast<double>(k));
    trace.samples.push_back(s);
  }
  const fs::path dir = scratch("series");
  fs::create_directories(dir);
  write_series_csv(trace, dir / "s.csv");
  const SeriesTable t = read_series_csv(dir / "s.csv");
  CHECK(t.columns.size() == 13);
  CHECK(t.column("area")[2] == 1.0 / 3.0 + 2);
  CHECK(t.column("H_min")[0] == std::numbers::pi);
  CHECK(std::isnan(t.column("lambda1")[0]));
  CHECK(std::isnan(t.column("lambda1_p3")[1]));
  CHECK(t.column("lambda1_p3")[2] == std::exp(-2.0));
  CHECK(kind_of([&] { t.column("nope"); }) == ErrorKind::DataError);

  std::ofstream(dir / "bad.csv") << slurp(dir / "s.csv") << "0.1,1,1,1,1,1,1,1,1,1,1,1,1\n";
  CHECK(kind_of([&] { read_series_csv(dir / "bad.csv"); }) == ErrorKind::DataError);
  std::ofstream(dir / "hdr.csv") << "t,area\n0,1\n";
  CHECK(kind_of([&] { read_series_csv(dir / "hdr.csv"); }) == ErrorKind::DataError);
  CHECK(kind_of([&] { read_series_csv(dir / "none.csv"); }) == ErrorKind::IoError);
}

TEST_CASE("mesh files round trip through the atlas") {
  const fs::path dir = scratch("mesh");
  fs::create_directories(dir);
  const AtlasPtr ico = build_atlas(AtlasKind::Icosphere, 2);
  const StarSurface s = embed(ico, EllipsoidProfile{1.5, 1.0, 0.8});
  write_off(s, dir / "s.off");
  std::vector<std::array<int, 3>> tris;
  const auto points = read_off(dir / "s.off", &tris);
  CHECK(tris == ico->triangles());
  const StarSurface back = surface_from_positions(ico, points, 0.5);
  CHECK((back.radii - s.radii).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(back.time == 0.5);
  CHECK(slurp(dir / "s.off").rfind("OFF\n162 320 0\n", 0) == 0);

  const AtlasPtr circle = build_atlas(AtlasKind::Circle, 64);
  const StarSurface c = embed(circle, EllipsoidProfile{1.3, 1.0, 1.0});
  write_curve_csv(c, dir / "c.csv");
  CHECK((surface_from_positions(circle, read_curve_csv(dir / "c.csv"), 0.0).radii - c.radii).cwiseAbs().maxCoeff() < 1e-14);

  auto moved = points;
  moved[5] += Eigen::Vector3d(0.01, 0.0, 0.0);
  CHECK(kind_of([&] { surface_from_positions(ico, moved, 0.0); }) == ErrorKind::DataError);
  moved.pop_back();
  CHECK(kind_of([&] { surface_from_positions(ico, moved, 0.0); }) == ErrorKind::DataError);
  std::ofstream(dir / "x.off") << "PLY\n";
  CHECK(kind_of([&] { read_off(dir / "x.off"); }) == ErrorKind::DataError);
}

TEST_CASE("sphere scenario passes every check and writes the artifact") {
  const RunArtifact a = run_scenario(small("sphere(1)", 1.0, scratch("sphere")));
  REQUIRE(a.completed);
  CHECK(a.all_pass());
  CHECK(exit_code(a) == 0);
  CHECK(a.reports.size() == check_names().size());
  for (const auto& r : a.reports) {
    CAPTURE(r.name);
    CHECK(r.status == CheckStatus::Pass);
  }
  CHECK(a.alpha == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(a.final_mean_radius == doctest::Approx(std::exp(0.5)).epsilon(0.005));

  const fs::path d = a.directory;
  for (const char* f : {"config.json", "series.csv", "report.json", "summary.md", "snapshots/snapshot_t0.000000.off",
                        "snapshots/snapshot_t1.000000.off", "eigenfunctions/u_p2_t0.000000.csv",
                        "eigenfunctions/u_p2_t1.000000.csv", "eigenfunctions/summary.json"})
    CHECK_MESSAGE(fs::exists(d / f), f);
  CHECK(std::distance(fs::directory_iterator(d / "snapshots"), fs::directory_iterator{}) == 51);

  const json report = json::parse(slurp(d / "report.json"));
  CHECK(report["status"] == "completed");
  CHECK(report["abort"].is_null());
  std::set<std::string> names;
  for (const auto& c : report["checks"]) {
    for (const char* key : {"name", "paper_anchor", "margin", "tolerance", "pass"}) CHECK(c.contains(key));
    CHECK(names.insert(c["name"].get<std::string>()).second);
  }
  CHECK(names.size() == check_names().size());
  const auto& flags = report["flags"];
  CHECK(std::find(flags.begin(), flags.end(), "h_decay_stated_rate_differs_from_sphere_rate") != flags.end());

  const std::string summary = slurp(d / "summary.md");
  CHECK(summary.find("| h_decay | pass |") != std::string::npos);
  CHECK(summary.find("fail") == std::string::npos);

  const SeriesTable t = read_series_csv(d / "series.csv");
  CHECK(t.rows.size() == 51);
  CHECK(parse_config(d / "config.json").t_end == 1.0);
}

TEST_CASE("reruns are byte identical") {
  ScenarioConfig c = small("perturbed(1,0.05,3)", 0.2, scratch("det_a"));
  c.p = {2.0, 3.0};
  c.resolution = 1;
  c.sample_interval = 0.05;
  const RunArtifact a = run_scenario(c);
  c.output = scratch("det_b");
  const RunArtifact b = run_scenario(c);
  CHECK(slurp(a.directory / "series.csv") == slurp(b.directory / "series.csv"));
  CHECK(slurp(a.directory / "report.json") == slurp(b.directory / "report.json"));
  CHECK(slurp(a.directory / "snapshots/snapshot_t0.200000.off") == slurp(b.directory / "snapshots/snapshot_t0.200000.off"));

  c.seed = 5;
  c.shape = "perturbed(1,0.05)";
  c.profile = parse_shape(c.shape, c.seed);
  c.output = scratch("det_c");
  const RunArtifact other = run_scenario(c);
  CHECK(slurp(a.directory / "series.csv") != slurp(other.directory / "series.csv"));
}

TEST_CASE("mean-concave start aborts with hypothesis violation") {
  const RunArtifact a = run_scenario(small("perturbed(1,0.6,2)", 1.0, scratch("abort")));
  CHECK_FALSE(a.completed);
  CHECK(exit_code(a) == 2);
  CHECK(a.abort_kind == "hypothesis-violation");
  CHECK(*a.abort_time == 0.0);
  const json report = json::parse(slurp(a.directory / "report.json"));
  CHECK(report["status"] == "aborted");
  CHECK(report["abort"]["kind"] == "hypothesis-violation");
  CHECK(report["checks"].size() == check_names().size());
  for (const auto& c : report["checks"]) CHECK(c["status"] == "inconclusive");
  const std::string summary = slurp(a.directory / "summary.md");
  CHECK(summary.find("aborted at t = 0: hypothesis-violation") != std::string::npos);
}

TEST_CASE("fixed-step blowup keeps the partial series") {
  ScenarioConfig c = parse_config(json{{"backend", "curve"}, {"shape", "ellipse(2,1)"}, {"dt", 1e-3}, {"t_end", 1.0},
                                       {"checks", {"monotone"}}});
  c.output = scratch("blowup");
  const RunArtifact a = run_scenario(c);
  REQUIRE_FALSE(a.completed);
  CHECK(*a.abort_time > 0.0);
  const SeriesTable t = read_series_csv(a.directory / "series.csv");
  CHECK(!t.rows.empty());
  CHECK(t.rows.back()[0] <= *a.abort_time);
}

TEST_CASE("verify re-runs checks from the files") {
  const RunArtifact a = run_scenario(small("ellipsoid(1.5,1,1)", 0.5, scratch("verify")));
  REQUIRE(a.completed);
  const RunArtifact v = verify_run(a.directory);
  REQUIRE(v.reports.size() == a.reports.size());
  for (std::size_t k = 0; k < a.reports.size(); ++k) {
    CAPTURE(a.reports[k].name);
    CHECK(v.reports[k].status == a.reports[k].status);
    if (std::isfinite(a.reports[k].margin)) CHECK(std::abs(v.reports[k].margin - a.reports[k].margin) < 1e-8);
  }
  const RunArtifact two = verify_run(a.directory, {"area_growth", "monotone"});
  REQUIRE(two.reports.size() == 2);
  CHECK(two.reports[0].name == "area_growth");
  CHECK(json::parse(slurp(a.directory / "report.json"))["checks"].size() == 2);
  CHECK(kind_of([&] { verify_run(a.directory, {"bogus"}); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { verify_run(scratch("verify_missing")); }) == ErrorKind::ConfigError);

  const fs::path empty = scratch("report_missing");
  fs::create_directories(empty);
  CHECK(kind_of([&] { emit_report(empty); }) == ErrorKind::IoError);
}

TEST_CASE("clustered eigenvalues are reported as inconclusive") {
  ScenarioConfig c = small("ellipsoid(1.02,1,1)", 0.1, scratch("cluster"));
  c.resolution = 3;
  c.checks = {"evolution_identity"};
  const RunArtifact a = run_scenario(c);
  REQUIRE(a.reports.size() == 1);
  CHECK(a.reports[0].status == CheckStatus::Inconclusive);
  CHECK(exit_code(a) == 0);
  CHECK(slurp(a.directory / "summary.md").find("| evolution_identity | inconclusive |") != std::string::npos);
}

TEST_CASE("mcf runs skip the inverse-flow checks") {
  ScenarioConfig c = small("ellipsoid(1.5,1,1)", 0.02, scratch("mcf"));
  c.speed = "mcf";
  const RunArtifact a = run_scenario(c);
  REQUIRE(a.completed);
  CHECK(find(a, "area_growth").status == CheckStatus::Inconclusive);
  CHECK(find(a, "monotone").status == CheckStatus::Inconclusive);
  CHECK(find(a, "evolution_identity").status == CheckStatus::Pass);
  CHECK(find(a, "sphere_comparison").status == CheckStatus::Pass);
}

TEST_CASE("explicit alpha above the initial pinching is caught") {
  ScenarioConfig c = small("ellipsoid(2,1,1)", 0.1, scratch("alpha_high"));
  c.alpha = 0.9;
  c.checks = {"sphere_comparison", "pinching_preserved"};
  const RunArtifact a = run_scenario(c);
  CHECK(find(a, "sphere_comparison").status == CheckStatus::Inconclusive);
  CHECK(find(a, "sphere_comparison").note.find("hypothesis-violation") != std::string::npos);
  CHECK(find(a, "pinching_preserved").status == CheckStatus::Fail);
  CHECK(exit_code(a) == 1);
}

TEST_CASE("alpha sweep reports the closed-form constant") {
  ScenarioConfig c = small("sphere(1)", 0.1, scratch("sweep_alpha"));
  c.resolution = 1;
  c.sample_interval = 0.05;
  c.checks = {"sphere_comparison", "area_growth"};
  const std::vector<double> alphas = {0.25, 0.5, 0.75, 1.0};
  const SweepResult r = sweep(c, "alpha", alphas, 2);
  REQUIRE(r.runs.size() == 4);
  for (const auto& a : r.runs) CHECK(a.completed);
  std::ifstream in(r.combined_csv);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("parameter,value,status,alpha,C,", 0) == 0);
  std::vector<double> cs;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string cell;
    for (int k = 0; k < 5; ++k) std::getline(row, cell, ',');
    cs.push_back(std::stod(cell));
  }
  REQUIRE(cs.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(cs[k] == doctest::Approx(std::exp((2.0 / alphas[k]) * (0.5 - alphas[k] / 2.0))));
  CHECK(cs[3] == 1.0);
  CHECK(cs[1] == doctest::Approx(std::numbers::e));
  // A larger constant weakens the bound, so the margin grows as alpha shrinks.
  CHECK(find(r.runs[0], "sphere_comparison").margin > find(r.runs[3], "sphere_comparison").margin);

  // Runs are isolated: the serial sweep writes the same files.
  ScenarioConfig serial = c;
  serial.output = scratch("sweep_alpha_serial");
  const SweepResult s = sweep(serial, "alpha", alphas, 1);
  CHECK(slurp(s.combined_csv) == slurp(r.combined_csv));
  CHECK(slurp(s.runs[2].directory / "series.csv") == slurp(r.runs[2].directory / "series.csv"));

  CHECK(kind_of([&] { sweep(c, "alpha", {}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { sweep(c, "shape", {1.0}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { sweep(c, "resolution", {2.5}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { sweep(c, "alpha", {1.5}); }) == ErrorKind::ConfigError);
}

TEST_CASE("resolution sweep refines the sphere eigenvalue") {
  ScenarioConfig c = small("sphere(1)", 0.02, scratch("sweep_res"));
  c.sample_interval = 0.02;
  c.checks = {"area_growth"};
  const SweepResult r = sweep(c, "resolution", {2, 3, 4});
  double previous = 1.0;
  for (const auto& a : r.runs) {
    const double err = std::abs(a.lambda1_t0 - 2.0) / 2.0;
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 1e-6);
}

TEST_CASE("dt sweep shows first-order convergence of the sphere radius") {
  ScenarioConfig c = small("sphere(1)", 1.0, scratch("sweep_dt"));
  c.resolution = 1;
  c.checks = {"area_growth"};
  const SweepResult r = sweep(c, "dt", {2e-3, 1e-3});
  const double e1 = std::abs(r.runs[0].final_mean_radius - std::exp(0.5));
  const double e2 = std::abs(r.runs[1].final_mean_radius - std::exp(0.5));
  CHECK(e1 / e2 >= 1.9);
}

TEST_CASE("worker count comes from the environment") {
  ::unsetenv("IMCF_WORKERS");
  CHECK(workers_from_env() == 1);
  ::setenv("IMCF_WORKERS", "3", 1);
  CHECK(workers_from_env() == 3);
  ::setenv("IMCF_WORKERS", "zero", 1);
  CHECK(workers_from_env() == 1);
  ::setenv("IMCF_WORKERS", "0", 1);
  CHECK(workers_from_env() == 1);
  ::unsetenv("IMCF_WORKERS");
}

TEST_CASE("json views of results") {
  EigenResult e;
  e.p = 3.0;
  e.eigenvalue = 0.5;
  e.restart_values = {0.5, 0.6};
  const json j = to_json(e);
  CHECK(j["p"] == 3.0);
  CHECK(j["restart_values"].size() == 2);
  CheckReport r;
  r.name = "x";
  r.anchor = "statement";
  r.margin = 0.1;
  r.finish();
  const json c = to_json(r);
  CHECK(c["paper_anchor"] == "statement");
  CHECK(c["pass"] == true);
  CHECK(c["status"] == "pass");
  CHECK(c.dump().find("\"t_from\":null") != std::string::npos);
  CHECK(format_time(0.02) == "0.020000");
}
