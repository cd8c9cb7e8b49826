#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "imcf/error.hpp"
#include "imcf/io.hpp"

namespace imcf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string lambda_key(double p) { return "lambda1_p" + label(p); }

SpeedFunction speed_of(const ScenarioConfig& c) { return c.speed == "mcf" ? SpeedFunction::mcf() : SpeedFunction::imcf(); }

double tolerance_for(const ScenarioConfig& c, const std::string& name, double fallback) {
  const auto it = c.tolerances.find(name);
  return it == c.tolerances.end() ? fallback : it->second;
}

std::vector<std::string> selected_checks(const ScenarioConfig& c) { return c.checks.empty() ? check_names() : c.checks; }

// alpha used for the schedule: explicit, else alpha_max of the initial surface.
double resolve_alpha(const ScenarioConfig& c, const GeometryTensors& g0) { return c.alpha ? *c.alpha : alpha_max(g0); }

CheckReport inconclusive(const std::string& name, const std::string& note) {
  CheckReport r;
  r.name = name;
  r.anchor = name;
  r.status = CheckStatus::Inconclusive;
  r.note = note;
  return r;
}

// One report per check: worst margin over p, fail dominates inconclusive.
CheckReport combine(const std::vector<std::pair<double, CheckReport>>& parts) {
  CheckReport r = parts.front().second;
  r.details.clear();
  r.note.clear();
  r.status = CheckStatus::Pass;
  r.margin = kNaN;
  for (const auto& [p, part] : parts) {
    const std::string prefix = "p" + label(p) + ".";
    if (std::isnan(r.margin) || part.margin < r.margin) r.margin = part.margin;
    r.details[prefix + "margin"] = part.margin;
    for (const auto& [k, v] : part.details) r.details[prefix + k] = v;
    if (!part.note.empty()) r.note += (r.note.empty() ? "" : "; ") + ("p = " + label(p) + ": " + part.note);
    if (part.status == CheckStatus::Fail) r.status = CheckStatus::Fail;
    else if (part.status == CheckStatus::Inconclusive && r.status == CheckStatus::Pass) r.status = CheckStatus::Inconclusive;
  }
  r.pass = r.status == CheckStatus::Pass;
  return r;
}

Series eigen_series(const FlowTrace& trace, double p, bool rescaled) {
  Series s;
  for (const auto& sample : trace.samples) {
    double v = sample.lambda1;
    if (p != 2.0) {
      const auto it = sample.extra.find(lambda_key(p));
      v = it == sample.extra.end() ? kNaN : it->second;
    }
    s.t.push_back(sample.t);
    s.value.push_back(rescaled ? eigen_rescale(v, sample.t, trace.dimension, p) : v);
  }
  return s;
}

bool imcf_only(const std::string& name) {
  return name != "epsilon_schedule" && name != "evolution_identity" && name != "sphere_comparison";
}

CheckReport evaluate(const std::string& name, const ScenarioConfig& c, const FlowTrace& trace, double alpha,
                     std::vector<std::string>& flags) {
  const int n = trace.dimension;
  const SpeedFunction speed = speed_of(c);
  auto per_p = [&](auto&& one) {
    std::vector<std::pair<double, CheckReport>> parts;
    for (double p : c.p) parts.emplace_back(p, one(p));
    return combine(parts);
  };
  auto need_alpha = [&] {
    if (!(alpha > 0.0)) throw Error(ErrorKind::HypothesisViolation, "no positive pinching constant alpha");
  };

  if (name == "epsilon_schedule") {
    need_alpha();
    std::vector<double> grid;
    const double t_max = std::max(20.0, c.t_end);
    for (int k = 0; 0.1 * k <= t_max + 1e-9; ++k) grid.push_back(0.1 * k);
    return epsilon_props(PinchSchedule(n, alpha), grid, tolerance_for(c, name, 1e-12));
  }
  if (name == "pinching_preserved") {
    need_alpha();
    return check_pinching_preserved(trace, PinchSchedule(n, alpha), tolerance_for(c, name, 0.02));
  }
  if (name == "monotone")
    return per_p([&](double p) { return check_monotone(eigen_series(trace, p, false), tolerance_for(c, name, 1e-4)); });
  if (name == "decay_bound") {
    need_alpha();
    return per_p([&](double p) {
      return check_decay_bound(eigen_series(trace, p, false), p, alpha / 2.0, tolerance_for(c, name, 0.01));
    });
  }
  if (name == "rescaled_monotone") {
    need_alpha();
    return per_p([&](double p) {
      return check_rescaled_monotone(eigen_series(trace, p, true), p, alpha / 2.0, n, tolerance_for(c, name, 1e-4));
    });
  }
  if (name == "rescaled_schedule_bound") {
    need_alpha();
    return per_p([&](double p) {
      return check_rescaled_schedule_bound(eigen_series(trace, p, true), p, PinchSchedule(n, alpha),
                                           tolerance_for(c, name, 0.01));
    });
  }
  if (name == "evolution_identity") {
    const StarSurface s0 = trace.surface(0);
    const GeometryTensors g0 = compute_tensors(s0);
    double rate = 0.0;
    for (Eigen::Index i = 0; i < g0.mean_curvature.size(); ++i)
      rate = std::max(rate, std::abs(speed(g0.mean_curvature[i], g0.second_form_norm2[i]) * g0.mean_curvature[i]) / n);
    const double dt = std::min(1e-3 / std::max(rate, 1e-12), choose_dt(g0, speed, TimeStepPolicy::cfl(0.2)));
    EvolutionOptions opt;
    opt.tolerance = tolerance_for(c, name, 0.02);
    opt.laplace.seed = c.seed;
    return evolution_residual(s0, step(s0, g0, speed, dt), speed, opt);
  }
  if (name == "rounding") return check_rounding(trace, 0.0);
  if (name == "sphere_comparison") {
    ComparisonOptions opt;
    opt.tolerance = tolerance_for(c, name, 0.005);
    opt.laplace.seed = c.seed;
    opt.plaplace.seed = c.seed;
    opt.alpha = c.alpha;
    const StarSurface s0 = trace.surface(0);
    CheckReport r = per_p([&](double p) { return check_sphere_comparison(s0, p, opt); });
    if (r.note.find("equality case") != std::string::npos) flags.push_back("equality_case_alpha_2_over_n");
    return r;
  }
  if (name == "area_growth") return check_area_growth(trace, tolerance_for(c, name, 0.01));
  if (name == "h_decay") {
    const double t_from = trace.samples.front().t + 0.5 * c.t_end;
    CheckReport r = check_h_decay(trace, t_from, tolerance_for(c, name, 0.2));
    if (n != 1) flags.push_back("h_decay_stated_rate_differs_from_sphere_rate");
    // The fitted slope is an asymptotic rate; before the rescaled surface is
    // nearly round it is reported but not judged.
    const auto k = static_cast<std::size_t>(
        std::find_if(trace.samples.begin(), trace.samples.end(), [&](const FlowSample& s) { return s.t >= t_from; }) -
        trace.samples.begin());
    const double roundness = sphericity(rescale_snapshot(trace.surface(k)));
    r.details["sphericity_at_fit_start"] = roundness;
    if (roundness > 0.05) {
      r.status = CheckStatus::Inconclusive;
      r.pass = false;
      r.note += "; rescaled sphericity " + label(roundness) + " > 0.05 at the fit start, not yet asymptotic";
    }
    return r;
  }
  throw Error(ErrorKind::ConfigError, "unknown check '" + name + "'");
}

std::vector<CheckReport> evaluate_all(const ScenarioConfig& c, const FlowTrace& trace, double alpha,
                                      std::vector<std::string>& flags) {
  std::vector<CheckReport> reports;
  if (c.speed != "imcf") flags.push_back("imcf_checks_skipped_for_speed_" + c.speed);
  if (!(alpha > 0.0)) flags.push_back("alpha_zero_initial_surface_not_pinched");
  for (const auto& name : selected_checks(c)) {
    if (c.speed != "imcf" && imcf_only(name)) {
      reports.push_back(inconclusive(name, "applies to inverse mean curvature flow only"));
      continue;
    }
    try {
      reports.push_back(evaluate(name, c, trace, alpha, flags));
    } catch (const Error& e) {
      reports.push_back(inconclusive(name, e.what()));
    }
  }
  return reports;
}

json report_json(const RunArtifact& a, const ScenarioConfig& c, const json& extra) {
  json j;
  j["status"] = a.completed ? "completed" : "aborted";
  j["shape"] = c.shape;
  j["alpha"] = a.alpha;
  j["checks"] = json::array();
  for (const auto& r : a.reports) j["checks"].push_back(to_json(r));
  j["flags"] = a.flags;
  if (a.completed) {
    j["abort"] = nullptr;
  } else {
    j["abort"] = {{"time", a.abort_time.value_or(kNaN)}, {"kind", a.abort_kind}, {"message", a.abort_message}};
  }
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "missing " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::DataError, "malformed " + path.string() + ": " + e.what());
  }
}

fs::path snapshot_path(const fs::path& dir, int n, double t) {
  return dir / "snapshots" / ("snapshot_t" + format_time(t) + (n == 1 ? ".csv" : ".off"));
}

void finish_run(RunArtifact& a, const ScenarioConfig& c, const FlowTrace& trace, const json& extra) {
  if (!trace.samples.empty()) a.final_mean_radius = trace.samples.back().radii.mean();
  write_text(a.directory / "report.json", report_json(a, c, extra).dump(2) + "\n");
  emit_report(a.directory);
}

}  // namespace

bool RunArtifact::all_pass() const {
  return completed && std::none_of(reports.begin(), reports.end(),
                                   [](const CheckReport& r) { return r.status == CheckStatus::Fail; });
}

int exit_code(const RunArtifact& a) {
  if (!a.completed) return 2;
  return a.all_pass() ? 0 : 1;
}

RunArtifact run_scenario(const ScenarioConfig& config) {
  config.validate();
  RunArtifact a;
  a.directory = config.output;
  fs::create_directories(a.directory);
  fs::remove_all(a.directory / "snapshots");
  fs::remove_all(a.directory / "eigenfunctions");
  fs::remove(a.directory / "report.json");
  fs::create_directories(a.directory / "snapshots");
  fs::create_directories(a.directory / "eigenfunctions");
  write_text(a.directory / "config.json", to_json(config).dump(2) + "\n");

  const SpeedFunction speed = speed_of(config);
  const StarSurface initial = embed(scenario_atlas(config), config.profile);
  const int n = initial.dimension();
  FlowConfig fc;
  fc.dt = config.dt;
  fc.t_end = config.t_end;
  fc.sample_interval = config.sample_interval;

  FlowTrace trace;
  json eigen_info = json::object();
  try {
    a.alpha = resolve_alpha(config, compute_tensors(initial));
    const double alpha = a.alpha;
    double lambda0 = kNaN;
    std::vector<EigenResult> first, last;
    auto observer = [&](const StarSurface& s, const GeometryTensors& g, FlowSample& sample) {
      const DiscreteOperator op = assemble(s, g);
      LaplaceOptions lopt;
      lopt.seed = config.seed;
      std::vector<EigenResult> results{lambda1_laplace(op, lopt)};
      sample.lambda1 = results.front().eigenvalue;
      for (double p : config.p) {
        if (p == 2.0) continue;
        PLaplaceConfig pc;
        pc.p = p;
        pc.seed = config.seed;
        results.push_back(lambda1_plaplace(op, pc));
        const double v = results.back().eigenvalue;
        sample.extra[lambda_key(p)] = v;
        sample.extra[lambda_key(p) + "_rescaled"] = eigen_rescale(v, s.time, n, p);
        if (std::isnan(sample.lambda1_p)) sample.lambda1_p = v;
      }
      if (std::isnan(lambda0)) lambda0 = sample.lambda1;
      sample.lambda1_rescaled = eigen_rescale(sample.lambda1, s.time, n, 2.0);
      if (alpha > 0.0) {
        const PinchSchedule schedule(n, alpha);
        sample.eps_t = schedule.epsilon(s.time - initial.time);
        sample.decay_bound = lambda0 * std::exp(-alpha * (s.time - initial.time));
        sample.rescaled_monotone_q =
            std::exp(-2.0 * (1.0 / n - alpha / 2.0) * (s.time - initial.time)) * sample.lambda1_rescaled;
      } else {
        sample.eps_t = 0.0;
      }
      if (g.mean_curvature.minCoeff() > 0.0) sample.pinch_margin = pinching_margin(g, sample.eps_t);
      if (first.empty()) first = results;
      last = std::move(results);
    };
    trace = run(initial, speed, fc, {observer});
    a.completed = true;
    a.lambda1_t0 = trace.samples.front().lambda1;
    auto dump_eigen = [&](const std::vector<EigenResult>& rs, double t, const char* tag) {
      json list = json::array();
      for (const auto& r : rs) {
        write_eigenfunction_csv(r.eigenfunction, a.directory / "eigenfunctions" /
                                                     ("u_p" + label(r.p) + "_t" + format_time(t) + ".csv"));
        list.push_back(to_json(r));
      }
      eigen_info[tag] = list;
    };
    dump_eigen(first, trace.samples.front().t, "initial");
    dump_eigen(last, trace.samples.back().t, "final");
  } catch (const FlowError& e) {
    trace = e.partial();
    a.abort_time = e.time();
    a.abort_kind = std::string(to_string(e.kind()));
    a.abort_message = e.detail();
  } catch (const Error& e) {
    a.abort_time = initial.time;
    a.abort_kind = std::string(to_string(e.kind()));
    a.abort_message = e.detail();
  }
  if (trace.atlas == nullptr) {
    trace.atlas = initial.atlas;
    trace.dimension = n;
  }
  write_text(a.directory / "eigenfunctions" / "summary.json", eigen_info.dump(2) + "\n");
  write_series_csv(trace, a.directory / "series.csv");
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const StarSurface s = trace.surface(k);
    if (n == 1) write_curve_csv(s, snapshot_path(a.directory, n, s.time));
    else write_off(s, snapshot_path(a.directory, n, s.time));
  }

  if (a.completed) {
    a.reports = evaluate_all(config, trace, a.alpha, a.flags);
  } else {
    for (const auto& name : selected_checks(config))
      a.reports.push_back(inconclusive(name, "run aborted at t = " + label(*a.abort_time) + " (" + a.abort_kind + ")"));
  }
  finish_run(a, config, trace, {{"steps", trace.steps}, {"samples", trace.samples.size()}});
  return a;
}

RunArtifact verify_run(const fs::path& directory, const std::vector<std::string>& checks) {
  ScenarioConfig config = parse_config(directory / "config.json");
  config.output = directory;
  if (!checks.empty()) {
    config.checks = checks;
    config.validate();
  }
  const json previous = read_json(directory / "report.json");
  RunArtifact a;
  a.directory = directory;
  a.completed = previous.value("status", "") == "completed";
  if (!a.completed && previous.contains("abort") && previous["abort"].is_object()) {
    const auto& ab = previous["abort"];
    a.abort_time = ab["time"].is_number() ? ab["time"].get<double>() : kNaN;
    a.abort_kind = ab.value("kind", "");
    a.abort_message = ab.value("message", "");
  }

  const SeriesTable table = read_series_csv(directory / "series.csv");
  FlowTrace trace;
  trace.atlas = scenario_atlas(config);
  trace.dimension = trace.atlas->dimension();
  trace.steps = previous.value("steps", std::size_t{0});
  const std::vector<std::string>& fixed = series_columns();
  for (const auto& row : table.rows) {
    FlowSample s;
    double* slots[] = {&s.t, &s.area, &s.h_min, &s.h_max, &s.pinch_margin, &s.eps_t, &s.lambda1, &s.lambda1_p,
                       &s.lambda1_rescaled, &s.decay_bound, &s.rescaled_monotone_q, &s.sphericity};
    for (std::size_t k = 0; k < fixed.size(); ++k) *slots[k] = row[k];
    for (std::size_t k = fixed.size(); k < table.columns.size(); ++k) s.extra[table.columns[k]] = row[k];
    const fs::path snap = snapshot_path(directory, trace.dimension, s.t);
    const auto points = trace.dimension == 1 ? read_curve_csv(snap) : read_off(snap);
    s.radii = surface_from_positions(trace.atlas, points, s.t).radii;
    trace.samples.push_back(std::move(s));
  }
  if (trace.samples.empty()) throw Error(ErrorKind::DataError, "run has no samples");
  a.lambda1_t0 = trace.samples.front().lambda1;
  a.alpha = config.alpha ? *config.alpha : previous.value("alpha", kNaN);
  if (!config.alpha && std::isnan(a.alpha)) a.alpha = alpha_max(compute_tensors(trace.surface(0)));

  if (a.completed) {
    a.reports = evaluate_all(config, trace, a.alpha, a.flags);
  } else {
    for (const auto& name : selected_checks(config))
      a.reports.push_back(inconclusive(name, "run aborted at t = " + label(a.abort_time.value_or(kNaN)) + " (" +
                                                 a.abort_kind + ")"));
  }
  finish_run(a, config, trace, {{"steps", trace.steps}, {"samples", trace.samples.size()}});
  return a;
}

int workers_from_env() {
  const char* v = std::getenv("IMCF_WORKERS");
  if (v == nullptr) return 1;
  char* end = nullptr;
  const long w = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || w < 1) return 1;
  return static_cast<int>(std::min(w, 64L));
}

SweepResult sweep(const ScenarioConfig& base, const std::string& parameter, const std::vector<double>& values,
                  int workers) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "sweep needs at least one value");
  if (parameter != "alpha" && parameter != "p" && parameter != "resolution" && parameter != "dt")
    throw Error(ErrorKind::InvalidArgument, "sweep parameter must be alpha, p, resolution or dt, got '" + parameter + "'");
  std::vector<ScenarioConfig> configs;
  for (double v : values) {
    ScenarioConfig c = base;
    if (parameter == "alpha") c.alpha = v;
    else if (parameter == "p") c.p = {v};
    else if (parameter == "dt") c.dt = TimeStepPolicy::fixed(v);
    else {
      if (v != std::floor(v)) throw Error(ErrorKind::InvalidArgument, "resolution values must be integers");
      c.resolution = static_cast<int>(v);
    }
    c.output = base.output / (parameter + "_" + label(v));
    c.validate();
    configs.push_back(std::move(c));
  }

  SweepResult result;
  result.runs.resize(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next++) < configs.size();) {
      try {
        result.runs[k] = run_scenario(configs[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int count = std::clamp(workers, 1, static_cast<int>(configs.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  result.combined_csv = base.output / "sweep.csv";
  std::ofstream out(result.combined_csv);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + result.combined_csv.string());
  const int n = base.dimension();
  const auto names = selected_checks(base);
  out << "parameter,value,status,alpha,C,lambda1_t0,final_mean_radius";
  for (const auto& name : names) out << ',' << name << "_margin," << name << "_status";
  out << '\n';
  out.precision(17);
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const RunArtifact& a = result.runs[k];
    double c = kNaN;
    if (a.alpha > 0.0) c = comparison_constant(n, configs[k].p.front(), a.alpha);
    out << parameter << ',' << values[k] << ',' << (a.completed ? "completed" : "aborted") << ',' << a.alpha << ',' << c
        << ',' << a.lambda1_t0 << ',' << a.final_mean_radius;
    for (const auto& name : names) {
      const auto it = std::find_if(a.reports.begin(), a.reports.end(), [&](const CheckReport& r) { return r.name == name; });
      if (it == a.reports.end()) out << ",nan,missing";
      else out << ',' << it->margin << ',' << to_string(it->status);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + result.combined_csv.string());
  return result;
}

fs::path emit_report(const fs::path& directory) {
  const json report = read_json(directory / "report.json");
  std::ostringstream md;
  md << "# Run summary\n\n";
  md << "- shape: `" << report.value("shape", "") << "`\n";
  md << "- status: " << report.value("status", "unknown") << "\n";
  if (report.contains("alpha") && report["alpha"].is_number()) md << "- alpha: " << report["alpha"].get<double>() << "\n";
  if (report.contains("abort") && report["abort"].is_object()) {
    const auto& ab = report["abort"];
    md << "- aborted at t = " << (ab["time"].is_number() ? label(ab["time"].get<double>()) : "?") << ": "
       << ab.value("kind", "") << ": " << ab.value("message", "") << "\n";
  }
  if (report.contains("flags") && !report["flags"].empty()) {
    md << "- flags:";
    for (const auto& f : report["flags"]) md << " `" << f.get<std::string>() << "`";
    md << "\n";
  }
  md << "\n| check | status | margin | tolerance | statement | note |\n|---|---|---|---|---|---|\n";
  auto num = [](const json& v) { return v.is_number() ? label(v.get<double>()) : std::string("n/a"); };
  for (const auto& c : report.value("checks", json::array())) {
    md << "| " << c.value("name", "") << " | " << c.value("status", "") << " | " << num(c["margin"]) << " | "
       << num(c["tolerance"]) << " | " << c.value("paper_anchor", "") << " | " << c.value("note", "") << " |\n";
  }
  const fs::path path = directory / "summary.md";
  write_text(path, md.str());
  return path;
}

}  // namespace imcf
