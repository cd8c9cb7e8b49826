#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imcf/error.hpp"
#include "imcf/geometry.hpp"

namespace imcf {

// Normal speed f(H, |A|^2) of the flow dX/dt = f nu.
class SpeedFunction {
 public:
  enum class Kind { Imcf, Mcf, Custom };
  using Map = std::function<double(double mean_curvature, double second_form_norm2)>;

  static SpeedFunction imcf() { return SpeedFunction(Kind::Imcf, {}); }
  static SpeedFunction mcf() { return SpeedFunction(Kind::Mcf, {}); }
  static SpeedFunction custom(Map map) { return SpeedFunction(Kind::Custom, std::move(map)); }

  Kind kind() const { return kind_; }
  std::string name() const;
  double operator()(double mean_curvature, double second_form_norm2) const;
  // |df/dH|, the diffusivity of the linearised radial update.
  double diffusivity(double mean_curvature, double second_form_norm2) const;

 private:
  SpeedFunction(Kind kind, Map map) : kind_(kind), map_(std::move(map)) {}
  Kind kind_;
  Map map_;
};

struct TimeStepPolicy {
  enum class Mode { Fixed, Cfl };
  Mode mode = Mode::Cfl;
  double value = 0.2;  // dt for Fixed, safety factor for Cfl

  static TimeStepPolicy fixed(double dt) { return {Mode::Fixed, dt}; }
  static TimeStepPolicy cfl(double factor) { return {Mode::Cfl, factor}; }
};

struct FlowConfig {
  TimeStepPolicy dt = TimeStepPolicy::cfl(0.2);
  double t_end = 1.0;
  double sample_interval = 0.02;
  // Abort threshold for IMCF; unset means 1e-6 * n / mean(r) of the
  // initial surface.
  std::optional<double> h_min_abort;
  bool rescale_output = true;
  // Ambient space-form curvature; only K = 0 is supported.
  double space_form_curvature = 0.0;
  std::size_t max_steps = 10'000'000;

  void validate() const;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct FlowSample {
  double t = 0.0;
  double area = kNaN;
  double h_min = kNaN;
  double h_max = kNaN;
  double pinch_margin = kNaN;
  double eps_t = kNaN;
  double lambda1 = kNaN;
  double lambda1_p = kNaN;
  double lambda1_rescaled = kNaN;
  double decay_bound = kNaN;
  double rescaled_monotone_q = kNaN;
  double sphericity = kNaN;
  std::map<std::string, double> extra;
  Eigen::VectorXd radii;  // snapshot of the unrescaled surface
};

struct FlowTrace {
  int dimension = 0;
  AtlasPtr atlas;
  std::vector<FlowSample> samples;
  std::size_t steps = 0;

  StarSurface surface(std::size_t k) const { return StarSurface{atlas, samples[k].radii, samples[k].t}; }
};

// Thrown by run() when the flow stops early; carries the samples gathered
// so far and the failing time.
class FlowError : public Error {
 public:
  FlowError(ErrorKind kind, const std::string& what, double time, FlowTrace partial)
      : Error(kind, what + " (t = " + std::to_string(time) + ")"), time_(time), partial_(std::move(partial)) {}
  double time() const { return time_; }
  const FlowTrace& partial() const { return partial_; }

 private:
  double time_;
  FlowTrace partial_;
};

using FlowObserver = std::function<void(const StarSurface&, const GeometryTensors&, FlowSample&)>;

double default_h_floor(const StarSurface& surface);

// One explicit Euler step of the radial reduction r <- r + dt v f(H, |A|^2).
StarSurface step(const StarSurface& surface, const GeometryTensors& tensors, const SpeedFunction& speed, double dt,
                 std::optional<double> h_min_abort = std::nullopt);

// Stable step for the current surface under the policy.
double choose_dt(const GeometryTensors& tensors, const SpeedFunction& speed, const TimeStepPolicy& policy);

FlowTrace run(const StarSurface& initial, const SpeedFunction& speed, const FlowConfig& config,
              const std::vector<FlowObserver>& observers = {});

// Radii scaled by exp(-t/n); the time label is kept.
StarSurface rescale_snapshot(const StarSurface& surface);

// Eigenvalue of the rescaled surface: exp(p t / n) * lambda.
double eigen_rescale(double lambda, double t, int n, double p);

// stddev(r) / mean(r) of the (rescaled) radial field.
double sphericity(const StarSurface& surface);

struct LineFit {
  double slope = kNaN;
  double intercept = kNaN;
  double residual = kNaN;  // RMS of the residuals
  double r_squared = kNaN;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct HDecayFit {
  LineFit h_max;
  LineFit h_min;
  double sphere_rate = kNaN;  // -1/n
  double stated_rate = -1.0;  // H ~ exp(-t)
  std::size_t samples_used = 0;
};

// Least-squares slope of log H_max and log H_min against t over samples
// with t >= t_from. Throws insufficient-data below 10 samples.
HDecayFit fit_H_decay(const FlowTrace& trace, double t_from = 0.0);

}  // namespace imcf
