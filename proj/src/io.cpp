#include "imcf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "imcf/error.hpp"

namespace imcf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

double number(const json& v, const std::string& key) {
  if (!v.is_number()) config_error("'" + key + "' must be a number");
  return v.get<double>();
}

std::vector<double> parse_numbers(const std::string& args) {
  std::vector<double> out;
  std::stringstream in(args);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      config_error("shape argument '" + item + "' is not a number");
    }
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_stream(const std::ios& s, const fs::path& path, const char* verb) {
  if (!s) throw Error(ErrorKind::IoError, std::string("cannot ") + verb + " " + path.string());
}

}  // namespace

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {
      "epsilon_schedule", "pinching_preserved", "monotone",   "decay_bound",
      "rescaled_monotone", "rescaled_schedule_bound", "evolution_identity", "rounding",
      "sphere_comparison", "area_growth", "h_decay"};
  return names;
}

RadialProfile parse_shape(const std::string& text, std::uint64_t seed) {
  static const std::regex form(R"(\s*([a-z_]+)\s*\(([^)]*)\)\s*)");
  std::smatch m;
  if (!std::regex_match(text, m, form)) config_error("shape '" + text + "' is not of the form kind(args)");
  const std::string kind = m[1];
  const std::vector<double> a = parse_numbers(m[2]);
  if (kind == "sphere" || kind == "circle") {
    if (a.size() != 1) config_error("sphere takes one argument (radius)");
    return SphereProfile{a[0]};
  }
  if (kind == "ellipsoid" || kind == "ellipse") {
    if (a.size() == 2) return EllipsoidProfile{a[0], a[1], 1.0};
    if (a.size() != 3) config_error("ellipsoid takes (a,b,c) or (a,b)");
    return EllipsoidProfile{a[0], a[1], a[2]};
  }
  if (kind == "perturbed" || kind == "perturbed_sphere") {
    if (a.size() == 2) return PerturbedSphereProfile{a[0], a[1], seed};
    if (a.size() != 3 || a[2] < 0.0 || a[2] != std::floor(a[2]))
      config_error("perturbed takes (radius,amplitude) or (radius,amplitude,seed)");
    return PerturbedSphereProfile{a[0], a[1], static_cast<std::uint64_t>(a[2])};
  }
  config_error("unknown shape kind '" + kind + "'");
}

void ScenarioConfig::validate() const {
  const int n = dimension();
  if (backend == Backend::Curve && resolution < 8) config_error("resolution must be >= 8 points for curves");
  if (backend == Backend::Surface && (resolution < 0 || resolution > 7))
    config_error("resolution must be an icosphere level in [0, 7]");
  if (speed != "imcf" && speed != "mcf") config_error("speed must be imcf or mcf");
  if (!(dt.value > 0.0)) config_error(dt.mode == TimeStepPolicy::Mode::Fixed ? "dt must be > 0" : "cfl must be > 0");
  if (!(t_end > 0.0)) config_error("t_end must be > 0");
  if (!(sample_interval > 0.0) || sample_interval > t_end) config_error("sample_interval must lie in (0, t_end]");
  if (p.empty()) config_error("p must list at least one exponent");
  for (double v : p)
    if (!(v > 1.0)) config_error("p values must be > 1");
  if (alpha && (!(*alpha > 0.0) || *alpha > 2.0 / n))
    config_error("alpha must lie in (0, 2/n] = (0, " + format_double(2.0 / n) + "]");
  const auto& known = check_names();
  for (const auto& c : checks)
    if (std::find(known.begin(), known.end(), c) == known.end()) config_error("unknown check '" + c + "'");
  for (const auto& [k, v] : tolerances) {
    if (std::find(known.begin(), known.end(), k) == known.end()) config_error("tolerance for unknown check '" + k + "'");
    if (k == "rounding") config_error("rounding takes no tolerance (its thresholds are slope < 0 and R^2 >= 0.9)");
    if (!(v >= 0.0)) config_error("tolerance for '" + k + "' must be >= 0");
  }
}

ScenarioConfig parse_config(const json& doc) {
  if (!doc.is_object()) config_error("config must be a JSON object");
  static const std::set<std::string> keys = {"backend", "shape", "resolution", "speed", "dt",       "cfl",    "t_end",
                                             "sample_interval", "p", "alpha",   "checks", "tolerances", "output", "seed"};
  for (const auto& [k, v] : doc.items())
    if (!keys.count(k)) config_error("unknown key '" + k + "'");

  ScenarioConfig c;
  if (doc.contains("seed")) {
    const auto& s = doc["seed"];
    if (!s.is_number_unsigned() && (!s.is_number_integer() || s.get<std::int64_t>() < 0)) config_error("'seed' must be a nonnegative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("backend")) {
    const std::string b = doc["backend"].is_string() ? doc["backend"].get<std::string>() : "";
    if (b == "curve") c.backend = Backend::Curve;
    else if (b == "surface") c.backend = Backend::Surface;
    else config_error("backend must be curve or surface");
  }
  c.resolution = c.backend == Backend::Curve ? 256 : 3;
  if (doc.contains("resolution")) {
    if (!doc["resolution"].is_number_integer()) config_error("'resolution' must be an integer");
    c.resolution = doc["resolution"].get<int>();
  }
  if (doc.contains("shape")) {
    const auto& s = doc["shape"];
    if (s.is_string()) {
      c.shape = s.get<std::string>();
    } else if (s.is_object()) {
      if (!s.contains("kind") || !s["kind"].is_string()) config_error("shape object needs a string 'kind'");
      std::string args;
      for (const char* field : {"radius", "a", "b", "c", "amplitude", "seed"}) {
        if (!s.contains(field)) continue;
        args += (args.empty() ? "" : ",") + format_double(number(s[field], std::string("shape.") + field));
      }
      c.shape = s["kind"].get<std::string>() + "(" + args + ")";
    } else {
      config_error("'shape' must be a string or an object");
    }
  }
  c.profile = parse_shape(c.shape, c.seed);
  if (doc.contains("speed")) {
    if (!doc["speed"].is_string()) config_error("'speed' must be imcf or mcf");
    c.speed = doc["speed"].get<std::string>();
  }
  if (doc.contains("dt") && doc.contains("cfl")) config_error("give either 'dt' or 'cfl', not both");
  if (doc.contains("dt")) c.dt = TimeStepPolicy::fixed(number(doc["dt"], "dt"));
  if (doc.contains("cfl")) c.dt = TimeStepPolicy::cfl(number(doc["cfl"], "cfl"));
  if (doc.contains("t_end")) c.t_end = number(doc["t_end"], "t_end");
  c.sample_interval = doc.contains("sample_interval") ? number(doc["sample_interval"], "sample_interval") : c.t_end / 50.0;
  if (doc.contains("p")) {
    const auto& p = doc["p"];
    c.p.clear();
    if (p.is_number()) {
      c.p.push_back(p.get<double>());
    } else if (p.is_array()) {
      for (const auto& v : p) c.p.push_back(number(v, "p"));
    } else {
      config_error("'p' must be a number or a list of numbers");
    }
  }
  if (doc.contains("alpha")) {
    const auto& a = doc["alpha"];
    if (a.is_string() && a.get<std::string>() == "auto") c.alpha.reset();
    else c.alpha = number(a, "alpha");
  }
  if (doc.contains("checks")) {
    const auto& k = doc["checks"];
    if (k.is_string() && k.get<std::string>() == "all") {
      c.checks.clear();
    } else if (k.is_array()) {
      for (const auto& v : k) {
        if (!v.is_string()) config_error("'checks' entries must be strings");
        c.checks.push_back(v.get<std::string>());
      }
      if (c.checks.empty()) config_error("'checks' list is empty");
    } else {
      config_error("'checks' must be \"all\" or a list of names");
    }
  }
  if (doc.contains("tolerances")) {
    const auto& t = doc["tolerances"];
    if (!t.is_object()) config_error("'tolerances' must be an object");
    for (const auto& [k, v] : t.items()) c.tolerances[k] = number(v, "tolerances." + k);
  }
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) config_error("'output' must be a path string");
    c.output = doc["output"].get<std::string>();
  }
  c.validate();
  return c;
}

ScenarioConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error("malformed JSON in " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["backend"] = c.backend == Backend::Curve ? "curve" : "surface";
  j["shape"] = c.shape;
  j["resolution"] = c.resolution;
  j["speed"] = c.speed;
  if (c.dt.mode == TimeStepPolicy::Mode::Fixed) j["dt"] = c.dt.value;
  else j["cfl"] = c.dt.value;
  j["t_end"] = c.t_end;
  j["sample_interval"] = c.sample_interval;
  j["p"] = c.p;
  if (c.alpha) j["alpha"] = *c.alpha;
  else j["alpha"] = "auto";
  if (c.checks.empty()) j["checks"] = "all";
  else j["checks"] = c.checks;
  j["tolerances"] = json::object();
  for (const auto& [k, v] : c.tolerances) j["tolerances"][k] = v;
  j["output"] = c.output.string();
  j["seed"] = c.seed;
  return j;
}

AtlasPtr scenario_atlas(const ScenarioConfig& config) {
  return build_atlas(config.backend == Backend::Curve ? AtlasKind::Circle : AtlasKind::Icosphere, config.resolution);
}

void write_off(const StarSurface& surface, const fs::path& path) {
  std::ofstream out(path);
  require_stream(out, path, "write");
  const auto& tris = surface.atlas->triangles();
  out << "OFF\n" << surface.size() << ' ' << tris.size() << " 0\n";
  for (std::size_t i = 0; i < surface.size(); ++i) {
    const Eigen::Vector3d x = surface.position(i);
    out << format_double(x.x()) << ' ' << format_double(x.y()) << ' ' << format_double(x.z()) << '\n';
  }
  for (const auto& t : tris) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  require_stream(out, path, "write");
}

void write_curve_csv(const StarSurface& surface, const fs::path& path) {
  std::ofstream out(path);
  require_stream(out, path, "write");
  out << "x,y\n";
  for (std::size_t i = 0; i < surface.size(); ++i) {
    const Eigen::Vector3d x = surface.position(i);
    out << format_double(x.x()) << ',' << format_double(x.y()) << '\n';
  }
  require_stream(out, path, "write");
}

std::vector<Eigen::Vector3d> read_off(const fs::path& path, std::vector<std::array<int, 3>>* triangles) {
  std::ifstream in(path);
  require_stream(in, path, "read");
  std::string magic;
  std::size_t nv = 0, nf = 0, ne = 0;
  if (!(in >> magic >> nv >> nf >> ne) || magic != "OFF")
    throw Error(ErrorKind::DataError, path.string() + " is not an OFF file");
  std::vector<Eigen::Vector3d> points(nv);
  for (auto& x : points)
    if (!(in >> x.x() >> x.y() >> x.z())) throw Error(ErrorKind::DataError, "truncated vertex list in " + path.string());
  if (triangles) triangles->clear();
  for (std::size_t f = 0; f < nf; ++f) {
    int count = 0;
    std::array<int, 3> t{};
    if (!(in >> count >> t[0] >> t[1] >> t[2]) || count != 3)
      throw Error(ErrorKind::DataError, "bad face " + std::to_string(f) + " in " + path.string());
    if (triangles) triangles->push_back(t);
  }
  return points;
}

std::vector<Eigen::Vector3d> read_curve_csv(const fs::path& path) {
  std::ifstream in(path);
  require_stream(in, path, "read");
  std::string line;
  std::getline(in, line);
  if (line != "x,y") throw Error(ErrorKind::DataError, path.string() + " lacks the x,y header");
  std::vector<Eigen::Vector3d> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::DataError, "bad row '" + line + "' in " + path.string());
    points.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)), 0.0);
  }
  return points;
}

StarSurface surface_from_positions(const AtlasPtr& atlas, const std::vector<Eigen::Vector3d>& positions, double time) {
  if (positions.size() != atlas->size())
    throw Error(ErrorKind::DataError, "snapshot has " + std::to_string(positions.size()) + " vertices, atlas has " +
                                          std::to_string(atlas->size()));
  Eigen::VectorXd radii(static_cast<Eigen::Index>(positions.size()));
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double r = positions[i].norm();
    if (!(r > 0.0) || (positions[i] / r - atlas->direction(i)).norm() > 1e-9)
      throw Error(ErrorKind::DataError, "snapshot vertex " + std::to_string(i) + " is off its atlas ray");
    radii[static_cast<Eigen::Index>(i)] = r;
  }
  return make_surface(atlas, std::move(radii), time);
}

const std::vector<std::string>& series_columns() {
  static const std::vector<std::string> columns = {"t",        "area",    "H_min",           "H_max",
                                                   "pinch_margin", "eps_t", "lambda1",        "lambda1_p",
                                                   "lambda1_rescaled", "decay_bound", "rescaled_monotone_q", "sphericity"};
  return columns;
}

void write_series_csv(const FlowTrace& trace, const fs::path& path) {
  std::set<std::string> extras;
  for (const auto& s : trace.samples)
    for (const auto& [k, v] : s.extra) extras.insert(k);
  std::ofstream out(path);
  require_stream(out, path, "write");
  bool first = true;
  for (const auto& c : series_columns()) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  for (const auto& e : extras) out << ',' << e;
  out << '\n';
  for (const auto& s : trace.samples) {
    for (double v : {s.t, s.area, s.h_min, s.h_max, s.pinch_margin, s.eps_t, s.lambda1, s.lambda1_p, s.lambda1_rescaled,
                     s.decay_bound, s.rescaled_monotone_q})
      out << format_double(v) << ',';
    out << format_double(s.sphericity);
    for (const auto& e : extras) {
      const auto it = s.extra.find(e);
      out << ',' << format_double(it == s.extra.end() ? kNaN : it->second);
    }
    out << '\n';
  }
  require_stream(out, path, "write");
}

std::vector<double> SeriesTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error(ErrorKind::DataError, "series has no column '" + name + "'");
  const auto k = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[k]);
  return out;
}

SeriesTable read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  require_stream(in, path, "read");
  SeriesTable table;
  std::string line, cell;
  if (!std::getline(in, line)) throw Error(ErrorKind::DataError, path.string() + " is empty");
  std::stringstream header(line);
  while (std::getline(header, cell, ',')) table.columns.push_back(cell);
  const auto& fixed = series_columns();
  if (table.columns.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), table.columns.begin()))
    throw Error(ErrorKind::DataError, path.string() + " does not start with the fixed series columns");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    while (std::getline(cells, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() != table.columns.size())
      throw Error(ErrorKind::DataError, "row " + std::to_string(table.rows.size() + 1) + " of " + path.string() +
                                            " has " + std::to_string(row.size()) + " cells");
    if (!table.rows.empty() && !(row[0] > table.rows.back()[0]))
      throw Error(ErrorKind::DataError, "series times are not strictly increasing in " + path.string());
    table.rows.push_back(std::move(row));
  }
  return table;
}

json to_json(const EigenResult& r) {
  json j;
  j["p"] = r.p;
  j["eigenvalue"] = r.eigenvalue;
  j["residual"] = r.residual;
  j["iterations"] = r.iterations;
  j["restarts"] = r.restarts;
  j["upper_bound"] = r.upper_bound;
  j["normalization_error"] = r.normalization_error;
  j["orthogonality_error"] = r.orthogonality_error;
  j["cluster"] = r.cluster;
  j["restart_values"] = r.restart_values;
  return j;
}

json to_json(const CheckReport& r) {
  json j;
  j["name"] = r.name;
  j["paper_anchor"] = r.anchor;
  j["margin"] = r.margin;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  j["status"] = to_string(r.status);
  j["t_from"] = r.t_from;
  j["t_to"] = r.t_to;
  j["note"] = r.note;
  j["details"] = json::object();
  for (const auto& [k, v] : r.details) j["details"][k] = v;
  return j;
}

void write_eigenfunction_csv(const Eigen::VectorXd& u, const fs::path& path) {
  std::ofstream out(path);
  require_stream(out, path, "write");
  out << "vertex,u\n";
  for (Eigen::Index i = 0; i < u.size(); ++i) out << i << ',' << format_double(u[i]) << '\n';
  require_stream(out, path, "write");
}

std::string format_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

}  // namespace imcf
