#include "imcf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "imcf/error.hpp"

namespace imcf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive_h(const GeometryTensors& tensors) {
  for (Eigen::Index i = 0; i < tensors.mean_curvature.size(); ++i)
    if (!(tensors.mean_curvature[i] > 0.0))
      throw Error(ErrorKind::HypothesisViolation, "H = " + std::to_string(tensors.mean_curvature[i]) + " at vertex " +
                                                      std::to_string(i) + " is not positive");
}

void require_series(const Series& s, std::size_t minimum) {
  if (s.t.size() != s.value.size()) throw Error(ErrorKind::DataError, "series time and value lengths differ");
  if (s.t.size() < minimum)
    throw Error(ErrorKind::InsufficientData,
                "series needs at least " + std::to_string(minimum) + " samples, got " + std::to_string(s.t.size()));
  for (std::size_t k = 0; k < s.value.size(); ++k) {
    if (!std::isfinite(s.value[k])) throw Error(ErrorKind::DataError, "nonfinite value in series at t = " + std::to_string(s.t[k]));
    if (k > 0 && !(s.t[k] > s.t[k - 1])) throw Error(ErrorKind::DataError, "series times are not increasing");
  }
}

CheckReport start(std::string name, std::string anchor, double tolerance) {
  CheckReport r;
  r.name = std::move(name);
  r.anchor = std::move(anchor);
  r.tolerance = tolerance;
  return r;
}

}  // namespace

PinchSchedule::PinchSchedule(int n, double alpha) : n_(n), alpha_(alpha) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be at least 1");
  const double top = 2.0 / n;
  if (!(alpha > 0.0) || alpha > top * (1.0 + 1e-12))
    throw Error(ErrorKind::InvalidArgument,
                "alpha = " + std::to_string(alpha) + " outside (0, 2/n] with 2/n = " + std::to_string(top));
  alpha_ = std::min(alpha, top);
  exp_beta_ = std::max(0.0, 1.0 / n - alpha_ / 2.0);
}

double PinchSchedule::beta() const { return exp_beta_ > 0.0 ? std::log(exp_beta_) : -kInf; }

double PinchSchedule::epsilon(double t) const {
  if (t < 0.0) throw Error(ErrorKind::InvalidArgument, "schedule time must be nonnegative");
  return 1.0 / n_ - exp_beta_ * std::exp(-alpha_ * t);
}

double PinchSchedule::derivative(double t) const { return alpha_ * exp_beta_ * std::exp(-alpha_ * t); }

double PinchSchedule::integrated_exponent(double t, double p) const {
  return (p / alpha_) * exp_beta_ * (1.0 - std::exp(-alpha_ * t));
}

double epsilon(double t, const PinchSchedule& schedule) { return schedule.epsilon(t); }

std::string to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Inconclusive: return "inconclusive";
  }
  return "fail";
}

void CheckReport::finish() {
  pass = margin >= -tolerance;
  if (status != CheckStatus::Inconclusive) status = pass ? CheckStatus::Pass : CheckStatus::Fail;
}

CheckReport epsilon_props(const PinchSchedule& schedule, const std::vector<double>& t_grid, double tolerance) {
  if (t_grid.empty()) throw Error(ErrorKind::InvalidArgument, "time grid is empty");
  const double inv_n = 1.0 / schedule.dimension();
  double bounds = kInf, increase = kInf, upper = kInf, lower = kInf;
  double previous = -kInf;
  for (double t : t_grid) {
    const double e = schedule.epsilon(t);
    const double de = schedule.derivative(t);
    bounds = std::min({bounds, e, inv_n - e});
    increase = std::min({increase, de, e - previous});
    previous = e;
    upper = std::min(upper, 2.0 * inv_n * e - 2.0 * e * e - de);
    lower = std::min(lower, 2.0 * e * e + de);
    if (e > 0.0) {
      const double q = e + de / (2.0 * e);
      upper = std::min(upper, inv_n - q);
      lower = std::min(lower, q);
    }
  }
  // Supremum 1/n: the gap 1/n - eps decays to 0.
  const double far = t_grid.back() + 1000.0 / schedule.alpha();
  const double sup_gap = inv_n - schedule.epsilon(far);
  CheckReport r = start("epsilon_schedule", "pinching schedule eps(t): bounds, monotone growth to 1/n, 2 eps^2 + eps' <= (2/n) eps",
                        tolerance);
  r.details = {{"bounds", bounds}, {"nondecreasing", increase}, {"sup_gap", -sup_gap}, {"upper", upper}, {"lower", lower}};
  r.margin = std::min({bounds, increase, -sup_gap, upper, lower});
  r.t_from = t_grid.front();
  r.t_to = t_grid.back();
  r.finish();
  return r;
}

double pinching_margin(const GeometryTensors& tensors, double eps) {
  require_positive_h(tensors);
  double m = kInf;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    m = std::min(m, tensors.min_principal(i) - eps * tensors.mean_curvature[static_cast<Eigen::Index>(i)]);
  return m;
}

double alpha_max(const GeometryTensors& tensors) {
  require_positive_h(tensors);
  double ratio = kInf;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    ratio = std::min(ratio, tensors.min_principal(i) / tensors.mean_curvature[static_cast<Eigen::Index>(i)]);
  return std::clamp(2.0 * ratio, 0.0, 2.0 / tensors.dimension);
}

CheckReport check_pinching_preserved(const FlowTrace& trace, const PinchSchedule& schedule, double tolerance) {
  CheckReport r = start("pinching_preserved", "pinching h >= eps(t) H g persists along the flow", tolerance);
  r.margin = kInf;
  double worst_raw = kInf;
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const GeometryTensors g = compute_tensors(trace.surface(k));
    const double raw = pinching_margin(g, schedule.epsilon(trace.samples[k].t));
    worst_raw = std::min(worst_raw, raw);
    r.margin = std::min(r.margin, raw / g.mean_curvature.mean());
  }
  if (!trace.samples.empty()) {
    r.t_from = trace.samples.front().t;
    r.t_to = trace.samples.back().t;
  }
  r.details = {{"alpha", schedule.alpha()}, {"worst_margin", worst_raw}};
  r.note = "margin normalized by mean H per sample";
  r.finish();
  return r;
}

CheckReport check_monotone(const Series& series, double tolerance) {
  require_series(series, 2);
  for (std::size_t k = 0; k < series.value.size(); ++k)
    if (!(series.value[k] > 0.0))
      throw Error(ErrorKind::DataError, "nonpositive eigenvalue " + std::to_string(series.value[k]) + " at t = " +
                                            std::to_string(series.t[k]));
  CheckReport r = start("monotone", "first eigenvalue non-increasing along the flow", tolerance);
  double worst = -kInf;
  for (std::size_t k = 0; k + 1 < series.value.size(); ++k)
    worst = std::max(worst, (series.value[k + 1] - series.value[k]) / series.value[k]);
  r.margin = -worst;
  r.t_from = series.t.front();
  r.t_to = series.t.back();
  r.finish();
  return r;
}

CheckReport check_decay_bound(const Series& series, double p, double eps0, double tolerance) {
  require_series(series, 1);
  if (eps0 < 0.0) throw Error(ErrorKind::InvalidArgument, "eps0 must be nonnegative");
  CheckReport r = start("decay_bound", "lambda(t) <= lambda(0) exp(-p eps0 t) with constant pinching eps0", tolerance);
  r.margin = series.value.size() == 1 ? 0.0 : kInf;
  for (std::size_t k = 1; k < series.value.size(); ++k) {
    const double bound = series.value.front() * std::exp(-p * eps0 * (series.t[k] - series.t.front()));
    r.margin = std::min(r.margin, (bound - series.value[k]) / bound);
  }
  r.details = {{"p", p}, {"eps0", eps0}};
  r.t_from = series.t.front();
  r.t_to = series.t.back();
  r.finish();
  return r;
}

CheckReport check_rescaled_monotone(const Series& rescaled, double p, double eps0, int n, double tolerance) {
  require_series(rescaled, 2);
  Series q;
  q.t = rescaled.t;
  for (std::size_t k = 0; k < rescaled.value.size(); ++k)
    q.value.push_back(std::exp(-p * (1.0 / n - eps0) * rescaled.t[k]) * rescaled.value[k]);
  CheckReport r = check_monotone(q, tolerance);
  r.name = "rescaled_monotone";
  r.anchor = "exp(-p (1/n - eps0) t) times the rescaled eigenvalue is non-increasing";
  r.details = {{"p", p}, {"eps0", eps0}};
  return r;
}

CheckReport check_rescaled_schedule_bound(const Series& rescaled, double p, const PinchSchedule& schedule,
                                          double tolerance) {
  require_series(rescaled, 1);
  CheckReport r = start("rescaled_schedule_bound",
                        "rescaled eigenvalue bounded by its initial value times exp(p int (1/n - eps(s)) ds)", tolerance);
  r.margin = rescaled.value.size() == 1 ? 0.0 : kInf;
  for (std::size_t k = 1; k < rescaled.value.size(); ++k) {
    const double bound = rescaled.value.front() * std::exp(schedule.integrated_exponent(rescaled.t[k], p));
    r.margin = std::min(r.margin, (bound - rescaled.value[k]) / bound);
  }
  r.details = {{"p", p}, {"alpha", schedule.alpha()}};
  r.t_from = rescaled.t.front();
  r.t_to = rescaled.t.back();
  r.finish();
  return r;
}

Eigen::MatrixXd evolution_form(const StarSurface& surface, const GeometryTensors& tensors, const DiscreteOperator& op,
                               const Eigen::MatrixXd& functions, const std::vector<double>& eigenvalues,
                               const SpeedFunction& speed, double residual_tol) {
  const Eigen::Index m = functions.cols();
  if (m == 0 || static_cast<std::size_t>(m) != eigenvalues.size() || functions.rows() != op.size())
    throw Error(ErrorKind::InvalidArgument, "eigenfunctions and eigenvalues do not match the operator");
  for (Eigen::Index a = 0; a < m; ++a) {
    const Eigen::VectorXd mu = op.mass.cwiseProduct(functions.col(a));
    const double res = (op.stiffness * functions.col(a) - eigenvalues[static_cast<std::size_t>(a)] * mu).norm();
    if (!(res <= residual_tol * mu.norm()))
      throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(a) + " is not an eigenfunction (relative residual " +
                                                  std::to_string(res / mu.norm()) + ")");
  }
  const auto n = static_cast<Eigen::Index>(surface.size());
  Eigen::VectorXd f(n);
  for (Eigen::Index i = 0; i < n; ++i) f[i] = speed(tensors.mean_curvature[i], tensors.second_form_norm2[i]);

  Eigen::MatrixXd shape = Eigen::MatrixXd::Zero(m, m), grad = Eigen::MatrixXd::Zero(m, m);
  std::vector<Eigen::Vector3d> w(static_cast<std::size_t>(m)), rotated(static_cast<std::size_t>(m));
  for (const auto& e : op.elements) {
    Eigen::Vector3d nf;
    if (e.count == 3) {
      const Eigen::Vector3d xa = surface.position(static_cast<std::size_t>(e.vertices[0]));
      nf = (surface.position(static_cast<std::size_t>(e.vertices[1])) - xa)
               .cross(surface.position(static_cast<std::size_t>(e.vertices[2])) - xa)
               .normalized();
    } else {
      const Eigen::Vector3d t = e.gradients[1].normalized();
      nf = Eigen::Vector3d(t.y(), -t.x(), 0.0);
    }
    for (Eigen::Index a = 0; a < m; ++a) w[static_cast<std::size_t>(a)] = e.gradient(functions.col(a));
    const double corner = e.measure / e.count;
    for (int c = 0; c < e.count; ++c) {
      const auto i = static_cast<std::size_t>(e.vertices[static_cast<std::size_t>(c)]);
      const Eigen::Vector3d& ni = tensors.normals[i];
      const double denom = 1.0 + nf.dot(ni);
      // Minimal rotation taking the element plane onto the vertex tangent plane.
      for (Eigen::Index a = 0; a < m; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        rotated[ua] = denom > 1e-12 ? Eigen::Vector3d(w[ua] - ni.dot(w[ua]) / denom * (nf + ni)) : w[ua];
      }
      const double fi = f[static_cast<Eigen::Index>(i)], hi = tensors.mean_curvature[static_cast<Eigen::Index>(i)];
      for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = a; b < m; ++b) {
          const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
          shape(a, b) += corner * fi * rotated[ua].dot(tensors.shape_operator[i] * rotated[ub]);
          grad(a, b) += corner * fi * hi * w[ua].dot(w[ub]);
        }
      }
    }
  }
  Eigen::MatrixXd form(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a; b < m; ++b) {
      double mass = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        mass += op.mass[i] * f[i] * tensors.mean_curvature[i] * functions(i, a) * functions(i, b);
      const double lambda = 0.5 * (eigenvalues[static_cast<std::size_t>(a)] + eigenvalues[static_cast<std::size_t>(b)]);
      form(a, b) = form(b, a) = -2.0 * shape(a, b) + grad(a, b) - lambda * mass;
    }
  }
  return form;
}

CheckReport evolution_residual(const StarSurface& now, const StarSurface& next, const SpeedFunction& speed,
                               const EvolutionOptions& options) {
  const double dt = next.time - now.time;
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "second surface must be later than the first");
  const GeometryTensors g0 = compute_tensors(now), g1 = compute_tensors(next);
  const DiscreteOperator op0 = assemble(now, g0), op1 = assemble(next, g1);
  LaplaceOptions lopt = options.laplace;
  lopt.tol = std::min(lopt.tol, 1e-10);
  const EigenResult e0 = lambda1_laplace(op0, lopt), e1 = lambda1_laplace(op1, lopt);

  const Eigen::MatrixXd form = evolution_form(now, g0, op0, e0.cluster_vectors, e0.cluster, speed, 1e-6);
  const auto m = static_cast<Eigen::Index>(e0.cluster.size());
  Eigen::MatrixXd moved = dt * form;
  for (Eigen::Index a = 0; a < m; ++a) moved(a, a) += e0.cluster[static_cast<std::size_t>(a)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(moved);
  const double rhs = (es.eigenvalues()[0] - e0.eigenvalue) / dt;
  const double lhs = (e1.eigenvalue - e0.eigenvalue) / dt;
  const double rel = std::abs(lhs - rhs) / std::abs(rhs);

  CheckReport r = start("evolution_identity", "first-variation formula for the first eigenvalue under the flow", 0.0);
  r.margin = options.tolerance - rel;
  r.t_from = now.time;
  r.t_to = next.time;
  const double width = e0.cluster_width() / e0.eigenvalue;
  r.details = {{"lhs", lhs},         {"rhs", rhs},       {"relative_error", rel},
               {"threshold", options.tolerance}, {"cluster_size", static_cast<double>(m)},
               {"cluster_width", width}, {"rhs_first_mode", form(0, 0)}, {"dt", dt}};
  if (m > 1 && width > options.gap_threshold) {
    r.status = CheckStatus::Inconclusive;
    r.note = "eigenvalue cluster of width " + std::to_string(width) + " (relative) is split but not resolved";
  }
  r.finish();
  return r;
}

double convergence_radius(double area, int n) {
  if (!(area > 0.0)) throw Error(ErrorKind::InvalidArgument, "area must be positive");
  return std::pow(area / unit_sphere_area(n), 1.0 / n);
}

CheckReport check_rounding(const FlowTrace& trace, double t_transient, double min_r_squared) {
  std::vector<double> t, log_s, s;
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    if (trace.samples[k].t < t_transient) continue;
    const double value = sphericity(rescale_snapshot(trace.surface(k)));
    t.push_back(trace.samples[k].t);
    s.push_back(value);
    log_s.push_back(std::log(std::max(value, 1e-300)));
  }
  if (t.size() < 10)
    throw Error(ErrorKind::InsufficientData, "rounding check needs at least 10 samples, got " + std::to_string(t.size()));
  CheckReport r = start("rounding", "rescaled surfaces converge exponentially fast to a round sphere", 0.0);
  r.t_from = t.front();
  r.t_to = t.back();
  const double initial = sphericity(rescale_snapshot(trace.surface(0)));
  if (s.front() <= 1e-12) {
    r.margin = 0.0;
    r.note = "already round";
    r.details = {{"initial", initial}, {"final", s.back()}};
    r.finish();
    return r;
  }
  double increase = -kInf;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) increase = std::max(increase, (s[k + 1] - s[k]) / s[k]);
  const LineFit fit = fit_line(t, log_s);
  r.margin = std::min({-fit.slope, fit.r_squared - min_r_squared, -increase});
  r.details = {{"slope", fit.slope},       {"r_squared", fit.r_squared},      {"max_relative_increase", increase},
               {"initial", initial},       {"final", s.back()},               {"ratio", s.back() / initial}};
  r.finish();
  return r;
}

double comparison_constant(int n, double p, double alpha) {
  if (n < 1 || !(p > 1.0) || !(alpha > 0.0) || alpha > 2.0 / n * (1.0 + 1e-12))
    throw Error(ErrorKind::InvalidArgument, "need n >= 1, p > 1 and alpha in (0, 2/n]");
  return std::exp((p / alpha) * std::max(0.0, 1.0 / n - alpha / 2.0));
}

CheckReport check_sphere_comparison(const StarSurface& surface, double p, const ComparisonOptions& options) {
  const GeometryTensors g = compute_tensors(surface);
  const double pinched = alpha_max(g);
  if (options.alpha && *options.alpha > pinched + 1e-12)
    throw Error(ErrorKind::HypothesisViolation, "alpha = " + std::to_string(*options.alpha) +
                                                    " exceeds the pinching of M (alpha_max = " + std::to_string(pinched) + ")");
  const double alpha = options.alpha.value_or(pinched);
  if (!(alpha > 0.0)) throw Error(ErrorKind::HypothesisViolation, "pinching constant alpha is 0");
  const int n = surface.dimension();
  const double c = comparison_constant(n, p, alpha);
  const double area = total_area(surface, g);

  const StarSurface unit = make_surface(surface.atlas, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(surface.size())));
  const double unit_area = total_area(unit, compute_tensors(unit));
  const double radius = std::pow(area / unit_area, 1.0 / n);
  const StarSurface sphere = make_surface(surface.atlas, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(surface.size()), radius));

  auto solve = [&](const StarSurface& s) {
    const DiscreteOperator op = assemble(s, compute_tensors(s));
    if (p == 2.0) return lambda1_laplace(op, options.laplace).eigenvalue;
    PLaplaceConfig cfg = options.plaplace;
    cfg.p = p;
    return lambda1_plaplace(op, cfg).eigenvalue;
  };
  const double lambda_m = solve(surface), lambda_s = solve(sphere);

  CheckReport r = start("sphere_comparison",
                        "lambda_p(M) >= C^{-1} lambda_p(S^n(R)) for equal volume under h >= (alpha/2) H g", options.tolerance);
  r.margin = (lambda_m - lambda_s / c) / lambda_s;
  r.t_from = r.t_to = surface.time;
  const double r_smooth = convergence_radius(area, n);
  const double closed_form = p == 2.0 ? n / (r_smooth * r_smooth) : kNaN;
  r.details = {{"alpha", alpha},           {"C", c},            {"alpha_max", pinched},
               {"lambda_M", lambda_m},     {"lambda_sphere", lambda_s},
               {"radius", radius},         {"radius_smooth", r_smooth},
               {"lambda_sphere_smooth", closed_form}, {"p", p}};
  if (2.0 / n - alpha <= options.equality_tolerance)
    r.note = "alpha = 2/n: equality case, M must be a round sphere";
  r.finish();
  return r;
}

CheckReport check_area_growth(const FlowTrace& trace, double tolerance) {
  if (trace.samples.empty()) throw Error(ErrorKind::InsufficientData, "empty trace");
  CheckReport r = start("area_growth", "area grows like exp(t) under inverse mean curvature flow", 0.0);
  const double a0 = trace.samples.front().area, t0 = trace.samples.front().t;
  double worst = 0.0;
  for (const auto& s : trace.samples) worst = std::max(worst, std::abs(std::log(s.area / a0) - (s.t - t0)));
  r.margin = tolerance - worst;
  r.details = {{"max_deviation", worst}, {"threshold", tolerance}};
  r.t_from = t0;
  r.t_to = trace.samples.back().t;
  r.finish();
  return r;
}

CheckReport check_h_decay(const FlowTrace& trace, double t_from, double tolerance) {
  const HDecayFit fit = fit_H_decay(trace, t_from);
  CheckReport r = start("h_decay", "mean curvature decays exponentially along the flow", tolerance);
  const double rel_sphere = std::abs(fit.h_max.slope / fit.sphere_rate - 1.0);
  const double rel_stated = std::abs(fit.h_max.slope / fit.stated_rate - 1.0);
  r.margin = -rel_sphere;
  r.details = {{"slope_h_max", fit.h_max.slope},  {"slope_h_min", fit.h_min.slope}, {"sphere_rate", fit.sphere_rate},
               {"stated_rate", fit.stated_rate}, {"relative_to_sphere_rate", rel_sphere},
               {"relative_to_stated_rate", rel_stated}};
  r.note = "fitted rate compared with -1/n (exact sphere) and with -1 (stated e^{-t}); for n = " +
           std::to_string(trace.dimension) + (trace.dimension == 1 ? " the two agree" : " they differ");
  r.t_from = t_from;
  r.t_to = trace.samples.back().t;
  r.finish();
  return r;
}

}  // namespace imcf
