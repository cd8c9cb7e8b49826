// Acceptance battery: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>

#include "imcf/error.hpp"
#include "imcf/io.hpp"

using namespace imcf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const fs::path& root() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "imcf_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

StarSurface run_to(const RadialProfile& profile, int level, double dt, double t_end) {
  const StarSurface s = embed(build_atlas(AtlasKind::Icosphere, level), profile);
  FlowConfig cfg;
  cfg.dt = TimeStepPolicy::fixed(dt);
  cfg.t_end = t_end;
  cfg.sample_interval = t_end;
  const FlowTrace trace = run(s, SpeedFunction::imcf(), cfg);
  return trace.surface(trace.samples.size() - 1);
}

ScenarioConfig scenario(const std::string& name, const std::string& shape, double t_end, double interval) {
  ScenarioConfig c;
  c.shape = shape;
  c.profile = parse_shape(shape, 0);
  c.resolution = 3;
  c.dt = TimeStepPolicy::fixed(1e-3);
  c.t_end = t_end;
  c.sample_interval = interval;
  c.p = {2.0, 3.0};
  c.output = root() / name;
  return c;
}

const CheckReport& report(const RunArtifact& a, const std::string& name) {
  for (const auto& r : a.reports)
    if (r.name == name) return r;
  throw Error(ErrorKind::DataError, "missing check " + name);
}

// Trace rebuilt from the artifact files, cut at t_max.
FlowTrace load_trace(const RunArtifact& a, double t_max) {
  const SeriesTable table = read_series_csv(a.directory / "series.csv");
  FlowTrace trace;
  trace.atlas = build_atlas(AtlasKind::Icosphere, 3);
  trace.dimension = 2;
  const auto t = table.column("t"), area = table.column("area");
  for (std::size_t k = 0; k < t.size() && t[k] <= t_max + 1e-9; ++k) {
    FlowSample s;
    s.t = t[k];
    s.area = area[k];
    s.radii = surface_from_positions(trace.atlas, read_off(a.directory / "snapshots" / ("snapshot_t" + format_time(t[k]) + ".off")), t[k]).radii;
    trace.samples.push_back(std::move(s));
  }
  return trace;
}

double max_area_deviation(const RunArtifact& a, double t_max) {
  const SeriesTable table = read_series_csv(a.directory / "series.csv");
  const auto t = table.column("t"), area = table.column("area");
  double worst = 0.0;
  for (std::size_t k = 0; k < t.size() && t[k] <= t_max + 1e-9; ++k)
    worst = std::max(worst, std::abs(std::log(area[k] / area[0]) - t[k]));
  return worst;
}

Outcome criterion1() {
  Outcome o;
  const double exact = std::exp(0.5);
  const double e1 = std::abs(run_to(SphereProfile{1.0}, 3, 1e-3, 1.0).radii.mean() - exact) / exact;
  const double e2 = std::abs(run_to(SphereProfile{1.0}, 3, 5e-4, 1.0).radii.mean() - exact) / exact;
  o.require(e1 <= 0.005, "rel error " + fmt("%.3g", e1) + " <= 0.5%");
  o.require(e1 / e2 >= 1.9, "halving dt ratio " + fmt("%.4g", e1 / e2) + " >= 1.9");
  return o;
}

struct Runs {
  RunArtifact sphere;
  RunArtifact ellipsoid;
};

const Runs& runs() {
  static const Runs r = [] {
    Runs out;
    out.sphere = run_scenario(scenario("sphere", "sphere(1)", 2.0, 0.04));
    out.ellipsoid = run_scenario(scenario("ellipsoid", "ellipsoid(1.5,1,1)", 3.0, 0.05));
    return out;
  }();
  return r;
}

Outcome criterion2() {
  Outcome o;
  for (const RunArtifact* a : {&runs().sphere, &runs().ellipsoid}) {
    o.require(a->completed, a->directory.filename().string() + " completed");
    const double dev = max_area_deviation(*a, 2.0);
    o.require(dev <= 0.01, a->directory.filename().string() + " max |log(A/A0) - t| = " + fmt("%.3g", dev));
  }
  return o;
}

Outcome criterion3() {
  Outcome o;
  auto lambda = [](const StarSurface& s) { return lambda1_laplace(assemble(s, compute_tensors(s))).eigenvalue; };
  const double sphere = lambda(embed(build_atlas(AtlasKind::Icosphere, 4), SphereProfile{1.0}));
  o.require(std::abs(sphere - 2.0) / 2.0 <= 0.02, "unit S^2 level 4: " + fmt("%.8f", sphere));
  const double circle = lambda(embed(build_atlas(AtlasKind::Circle, 512), SphereProfile{1.0}));
  o.require(std::abs(circle - 1.0) <= 1e-3, "circle N=512: " + fmt("%.8f", circle));
  const auto ico = build_atlas(AtlasKind::Icosphere, 3);
  const StarSurface m = embed(ico, EllipsoidProfile{1.5, 1.0, 1.0});
  const double c = 1.7;
  const double base = lambda(m), scaled = lambda(make_surface(ico, c * m.radii));
  const double rel = std::abs(scaled - base / (c * c)) / (base / (c * c));
  o.require(rel <= 1e-6, "dilation covariance rel " + fmt("%.2g", rel));
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto ico = build_atlas(AtlasKind::Icosphere, 3);
  for (const RadialProfile& profile : {RadialProfile{SphereProfile{1.0}}, RadialProfile{EllipsoidProfile{1.5, 1.0, 1.0}}}) {
    const StarSurface s = embed(ico, profile);
    const DiscreteOperator op = assemble(s, compute_tensors(s));
    PLaplaceConfig cfg;
    cfg.p = 2.0;
    const double lp = lambda1_plaplace(op, cfg).eigenvalue, l2 = lambda1_laplace(op).eigenvalue;
    o.require(std::abs(lp - l2) / l2 <= 0.01, describe(profile) + " p=2 vs Laplace rel " + fmt("%.2g", std::abs(lp - l2) / l2));
  }
  const double length = 2.0 * std::numbers::pi;
  const StarSurface circle = embed(build_atlas(AtlasKind::Circle, 512), SphereProfile{1.0});
  const DiscreteOperator op = assemble(circle, compute_tensors(circle));
  for (double p : {1.5, 3.0}) {
    const OracleResult oracle = circle_plaplace_oracle_run(length, p, 512);
    PLaplaceConfig cfg;
    cfg.p = p;
    const double value = lambda1_plaplace(op, cfg).eigenvalue;
    const double rel = std::abs(value - oracle.value) / oracle.value;
    o.require(rel <= 0.02, "circle p=" + fmt("%g", p) + " vs oracle rel " + fmt("%.2g", rel));
    o.require(oracle.dispersion < 1e-6, "oracle dispersion " + fmt("%.2g", oracle.dispersion));
  }
  return o;
}

Outcome criterion5() {
  Outcome o;
  std::vector<double> grid;
  for (int k = 0; k <= 200; ++k) grid.push_back(0.1 * k);
  double worst = std::numeric_limits<double>::infinity();
  for (int n : {1, 2, 3})
    for (double f : {0.2, 0.5, 0.8, 1.0}) worst = std::min(worst, epsilon_props(PinchSchedule(n, f * 2.0 / n), grid).margin);
  o.require(worst >= -1e-12, "worst margin " + fmt("%.3g", worst));
  return o;
}

Outcome criterion6() {
  Outcome o;
  for (const RunArtifact* a : {&runs().sphere, &runs().ellipsoid}) {
    const FlowTrace trace = load_trace(*a, 2.0);
    const CheckReport r = check_pinching_preserved(trace, PinchSchedule(2, a->alpha), 0.02);
    o.require(r.pass && trace.samples.back().t >= 2.0 - 1e-9,
              a->directory.filename().string() + " alpha " + fmt("%.4f", a->alpha) + " margin/H " + fmt("%.3g", r.margin) +
                  " to t = " + fmt("%g", trace.samples.back().t));
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  for (const RunArtifact* a : {&runs().sphere, &runs().ellipsoid}) {
    const std::string name = a->directory.filename().string();
    const CheckReport& m = report(*a, "monotone");
    o.require(m.pass && m.details.count("p3.margin") == 1, name + " monotone p=2,3 margin " + fmt("%.3g", m.margin));
    const CheckReport& d = report(*a, "decay_bound");
    o.require(d.pass && d.tolerance == 0.01, name + " decay bound margin " + fmt("%.3g", d.margin));
  }
  return o;
}

Outcome criterion8() {
  Outcome o;
  for (const RunArtifact* a : {&runs().sphere, &runs().ellipsoid}) {
    const CheckReport& r = report(*a, "rescaled_monotone");
    o.require(r.pass && r.tolerance == 1e-4, a->directory.filename().string() + " rescaled monotone margin " + fmt("%.3g", r.margin));
  }
  const SeriesTable t = read_series_csv(runs().sphere.directory / "series.csv");
  const auto rescaled = t.column("lambda1_rescaled");
  double spread = 0.0;
  for (double v : rescaled) spread = std::max(spread, std::abs(v / rescaled.front() - 1.0));
  o.require(spread <= 0.005, "sphere rescaled lambda spread " + fmt("%.3g", spread));
  return o;
}

Outcome criterion9() {
  Outcome o;
  const auto ico = build_atlas(AtlasKind::Icosphere, 3);
  auto residual = [&](const StarSurface& s, const SpeedFunction& f, double dt, double tol) {
    EvolutionOptions opt;
    opt.tolerance = tol;
    return evolution_residual(s, step(s, compute_tensors(s), f, dt), f, opt);
  };
  const StarSurface sphere = embed(ico, SphereProfile{1.0}), ellipsoid = embed(ico, EllipsoidProfile{1.5, 1.0, 1.0});
  const CheckReport rs = residual(sphere, SpeedFunction::imcf(), 1e-3, 0.02);
  o.require(rs.pass && std::abs(rs.details.at("rhs") + 2.0) < 1e-6,
            "sphere rel " + fmt("%.3g", rs.details.at("relative_error")) + ", rhs " + fmt("%.6f", rs.details.at("rhs")));
  const CheckReport re = residual(ellipsoid, SpeedFunction::imcf(), 1e-3, 0.05);
  o.require(re.pass, "ellipsoid rel " + fmt("%.3g", re.details.at("relative_error")));
  // MCF: identity at the start and after a short run.
  FlowConfig cfg;
  cfg.dt = TimeStepPolicy::fixed(1e-4);
  cfg.t_end = 0.02;
  cfg.sample_interval = 0.02;
  for (const StarSurface* s : {&sphere, &ellipsoid}) {
    const FlowTrace trace = run(*s, SpeedFunction::mcf(), cfg);
    for (std::size_t k : {std::size_t{0}, trace.samples.size() - 1}) {
      const CheckReport r = residual(trace.surface(k), SpeedFunction::mcf(), 1e-4, 0.05);
      o.require(r.pass, std::string(s == &sphere ? "mcf sphere" : "mcf ellipsoid") + " t=" + fmt("%g", trace.samples[k].t) +
                            " rel " + fmt("%.3g", r.details.at("relative_error")));
    }
  }
  return o;
}

Outcome criterion10() {
  Outcome o;
  const auto ico = build_atlas(AtlasKind::Icosphere, 3);
  for (double a : {1.2, 1.5, 2.0}) {
    const CheckReport r = check_sphere_comparison(embed(ico, EllipsoidProfile{a, 1.0, 1.0}), 2.0);
    o.require(r.margin >= -0.005, "a=" + fmt("%g", a) + " margin " + fmt("%.4g", r.margin) + " C " + fmt("%.4g", r.details.at("C")));
  }
  ComparisonOptions opt;
  const CheckReport s = check_sphere_comparison(embed(ico, SphereProfile{1.3}), 2.0, opt);
  o.require(std::abs(s.margin) <= 2.0 * opt.laplace.tol, "sphere margin " + fmt("%.2g", s.margin));
  o.require(comparison_constant(2, 2.0, 1.0) == 1.0, "C(2,2,1) = " + fmt("%.17g", comparison_constant(2, 2.0, 1.0)));
  return o;
}

Outcome criterion11() {
  Outcome o;
  const CheckReport& r = report(runs().ellipsoid, "rounding");
  o.require(r.t_to >= 3.0 - 1e-9, "run to t = " + fmt("%g", r.t_to));
  o.require(r.details.at("ratio") <= 0.5, "sphericity ratio " + fmt("%.3g", r.details.at("ratio")));
  o.require(r.details.at("slope") < 0.0 && r.details.at("r_squared") >= 0.9,
            "slope " + fmt("%.3g", r.details.at("slope")) + " R^2 " + fmt("%.4f", r.details.at("r_squared")));
  o.require(r.pass, "rounding check " + to_string(r.status));
  const double radius = convergence_radius(16.0 * std::numbers::pi, 2);
  o.require(radius == 2.0, "convergence_radius(16 pi, 2) = " + fmt("%.17g", radius));
  return o;
}

Outcome criterion12() {
  Outcome o;
  const SeriesTable t = read_series_csv(runs().sphere.directory / "series.csv");
  const auto time = t.column("t"), h = t.column("H_max");
  std::vector<double> log_h;
  for (double v : h) log_h.push_back(std::log(v));
  const double slope = fit_line(time, log_h).slope;
  o.require(std::abs(slope / -0.5 - 1.0) <= 0.01, "slope " + fmt("%.5f", slope));
  const CheckReport& r = report(runs().sphere, "h_decay");
  const bool flagged = r.note.find("differ") != std::string::npos && r.details.count("relative_to_stated_rate") == 1;
  o.require(flagged, "stated e^{-t} rate compared: relative " + fmt("%.3g", r.details.count("relative_to_stated_rate") ? r.details.at("relative_to_stated_rate") : NAN));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sphere IMCF exactness", criterion1},        {"area law", criterion2},
      {"spectral accuracy", criterion3},            {"p-Laplace", criterion4},
      {"epsilon schedule", criterion5},             {"pinching preservation", criterion6},
      {"monotonicity and decay", criterion7},       {"rescaled monotone quantity", criterion8},
      {"evolution identity", criterion9},           {"sphere comparison", criterion10},
      {"rounding", criterion11},                    {"H decay", criterion12}};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
