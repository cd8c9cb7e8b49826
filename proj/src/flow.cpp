#include <algorithm>
#include <cmath>

#include "imcf/flow.hpp"

namespace imcf {

std::string SpeedFunction::name() const {
  switch (kind_) {
    case Kind::Imcf: return "imcf";
    case Kind::Mcf: return "mcf";
    case Kind::Custom: return "custom";
  }
  return "unknown";
}

double SpeedFunction::operator()(double h, double a2) const {
  switch (kind_) {
    case Kind::Imcf: return 1.0 / h;
    case Kind::Mcf: return -h;
    case Kind::Custom: return map_(h, a2);
  }
  return kNaN;
}

double SpeedFunction::diffusivity(double h, double a2) const {
  switch (kind_) {
    case Kind::Imcf: return 1.0 / (h * h);
    case Kind::Mcf: return 1.0;
    case Kind::Custom: {
      const double dh = 1e-6 * std::max(std::abs(h), 1e-12);
      return std::abs(map_(h + dh, a2) - map_(h - dh, a2)) / (2.0 * dh);
    }
  }
  return kNaN;
}

void FlowConfig::validate() const {
  if (!(dt.value > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step / cfl factor must be positive");
  if (!(t_end > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_end must be positive");
  if (!(sample_interval > 0.0) || sample_interval > t_end)
    throw Error(ErrorKind::InvalidArgument, "sample_interval must lie in (0, t_end]");
  if (space_form_curvature != 0.0)
    throw Error(ErrorKind::InvalidArgument, "only Euclidean ambient space (K = 0) is supported");
  if (h_min_abort && !(*h_min_abort > 0.0)) throw Error(ErrorKind::InvalidArgument, "H floor must be positive");
}

double default_h_floor(const StarSurface& surface) {
  return 1e-6 * surface.dimension() / surface.radii.mean();
}

StarSurface step(const StarSurface& surface, const GeometryTensors& tensors, const SpeedFunction& speed, double dt,
                 std::optional<double> h_min_abort) {
  const auto n = surface.radii.size();
  const double floor = h_min_abort.value_or(default_h_floor(surface));
  Eigen::VectorXd radii(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = tensors.mean_curvature[i];
    if (speed.kind() == SpeedFunction::Kind::Imcf && !(h > floor))
      throw Error(ErrorKind::CurvatureCollapse,
                  "H = " + std::to_string(h) + " at vertex " + std::to_string(i) + " below floor " + std::to_string(floor));
    radii[i] = surface.radii[i] + dt * tensors.graph_factor[i] * speed(h, tensors.second_form_norm2[i]);
    if (!std::isfinite(radii[i]))
      throw Error(ErrorKind::NumericalBlowup, "nonfinite radius at vertex " + std::to_string(i));
    if (radii[i] <= 0.0)
      throw Error(ErrorKind::StarShapeLoss, "radius " + std::to_string(radii[i]) + " at vertex " + std::to_string(i));
  }
  return StarSurface{surface.atlas, std::move(radii), surface.time + dt};
}

double choose_dt(const GeometryTensors& tensors, const SpeedFunction& speed, const TimeStepPolicy& policy) {
  if (policy.mode == TimeStepPolicy::Mode::Fixed) return policy.value;
  double limit = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < tensors.mean_curvature.size(); ++i) {
    const double d = speed.diffusivity(tensors.mean_curvature[i], tensors.second_form_norm2[i]);
    if (d > 0.0) limit = std::min(limit, tensors.spacing[i] * tensors.spacing[i] / d);
  }
  if (!std::isfinite(limit)) throw Error(ErrorKind::NumericalBlowup, "no finite CFL limit");
  return policy.value * limit;
}

namespace {

void fill_base(const StarSurface& surface, const GeometryTensors& tensors, FlowSample& sample) {
  sample.t = surface.time;
  sample.area = total_area(surface, tensors);
  sample.h_min = tensors.mean_curvature.minCoeff();
  sample.h_max = tensors.mean_curvature.maxCoeff();
  sample.sphericity = sphericity(rescale_snapshot(surface));
  sample.radii = surface.radii;
}

}  // namespace

FlowTrace run(const StarSurface& initial, const SpeedFunction& speed, const FlowConfig& config,
              const std::vector<FlowObserver>& observers) {
  config.validate();
  FlowTrace trace;
  trace.dimension = initial.dimension();
  trace.atlas = initial.atlas;
  const double floor = config.h_min_abort.value_or(default_h_floor(initial));

  StarSurface surface = initial;
  GeometryTensors tensors = compute_tensors(surface);
  if (speed.kind() == SpeedFunction::Kind::Imcf && !(tensors.mean_curvature.minCoeff() > 0.0)) {
    Eigen::Index worst = 0;
    tensors.mean_curvature.minCoeff(&worst);
    throw FlowError(ErrorKind::HypothesisViolation,
                    "IMCF requires H > 0; H = " + std::to_string(tensors.mean_curvature[worst]) + " at vertex " +
                        std::to_string(worst),
                    surface.time, trace);
  }

  auto take_sample = [&] {
    FlowSample sample;
    fill_base(surface, tensors, sample);
    for (const auto& obs : observers) obs(surface, tensors, sample);
    trace.samples.push_back(std::move(sample));
  };

  const double t0 = initial.time;
  try {
    take_sample();
    std::size_t k = 1;
    while (surface.time < t0 + config.t_end - 1e-12) {
      const double target = std::min(t0 + static_cast<double>(k) * config.sample_interval, t0 + config.t_end);
      ++k;
      while (surface.time < target - 1e-12) {
        double dt = choose_dt(tensors, speed, config.dt);
        if (target - (surface.time + dt) < 1e-9 * dt) dt = target - surface.time;
        surface = step(surface, tensors, speed, dt, floor);
        tensors = compute_tensors(surface);
        if (++trace.steps > config.max_steps)
          throw Error(ErrorKind::NumericalBlowup, "step budget exhausted");
      }
      surface.time = target;
      take_sample();
    }
  } catch (const FlowError&) {
    throw;
  } catch (const Error& e) {
    throw FlowError(e.kind(), e.detail(), surface.time, trace);
  }
  for (const auto& s : trace.samples) {
    for (double v : {s.area, s.h_min, s.h_max, s.sphericity})
      if (!std::isfinite(v)) throw FlowError(ErrorKind::NumericalBlowup, "nonfinite sample", s.t, trace);
  }
  return trace;
}

StarSurface rescale_snapshot(const StarSurface& surface) {
  const double factor = std::exp(-surface.time / surface.dimension());
  return StarSurface{surface.atlas, surface.radii * factor, surface.time};
}

double eigen_rescale(double lambda, double t, int n, double p) {
  return std::exp(p * t / n) * lambda;
}

double sphericity(const StarSurface& surface) {
  const double mean = surface.radii.mean();
  const double var = (surface.radii.array() - mean).square().mean();
  return std::sqrt(var) / mean;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2 || x.size() != y.size()) throw Error(ErrorKind::InsufficientData, "line fit needs two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.residual = std::sqrt(ss_res / n);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

HDecayFit fit_H_decay(const FlowTrace& trace, double t_from) {
  std::vector<double> t, log_max, log_min;
  for (const auto& s : trace.samples) {
    if (s.t < t_from) continue;
    if (!(s.h_max > 0.0) || !(s.h_min > 0.0))
      throw Error(ErrorKind::DataError, "H must stay positive for the decay fit");
    t.push_back(s.t);
    log_max.push_back(std::log(s.h_max));
    log_min.push_back(std::log(s.h_min));
  }
  if (t.size() < 10)
    throw Error(ErrorKind::InsufficientData, "H decay fit needs at least 10 samples, got " + std::to_string(t.size()));
  HDecayFit fit;
  fit.h_max = fit_line(t, log_max);
  fit.h_min = fit_line(t, log_min);
  fit.sphere_rate = -1.0 / trace.dimension;
  fit.samples_used = t.size();
  return fit;
}

}  // namespace imcf
