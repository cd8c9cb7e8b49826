#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imcf/flow.hpp"
#include "imcf/spectral.hpp"

namespace imcf {

// eps(t) = 1/n - exp(beta - alpha t) with exp(beta) = 1/n - alpha/2, so that
// eps(0) = alpha/2. alpha = 2/n gives eps identically 1/n.
class PinchSchedule {
 public:
  PinchSchedule(int n, double alpha);

  int dimension() const { return n_; }
  double alpha() const { return alpha_; }
  double beta() const;  // -inf when alpha = 2/n
  double exp_beta() const { return exp_beta_; }

  double epsilon(double t) const;
  double derivative(double t) const;
  // Closed form of p * int_0^t (1/n - eps(s)) ds.
  double integrated_exponent(double t, double p) const;

 private:
  int n_;
  double alpha_;
  double exp_beta_;
};

double epsilon(double t, const PinchSchedule& schedule);

enum class CheckStatus { Pass, Fail, Inconclusive };
std::string to_string(CheckStatus status);

struct CheckReport {
  std::string name;
  std::string anchor;
  double margin = kNaN;
  double tolerance = 0.0;
  bool pass = false;
  CheckStatus status = CheckStatus::Fail;
  double t_from = kNaN;
  double t_to = kNaN;
  std::string note;
  std::map<std::string, double> details;

  // Sets pass / status from margin >= -tolerance.
  void finish();
};

CheckReport epsilon_props(const PinchSchedule& schedule, const std::vector<double>& t_grid, double tolerance = 1e-12);

// min_i (kappa_min_i - eps H_i); throws hypothesis-violation if some H_i <= 0.
double pinching_margin(const GeometryTensors& tensors, double eps);

// clamp(2 min_i kappa_min_i / H_i, 0, 2/n).
double alpha_max(const GeometryTensors& tensors);

// Margin is min_k pinching_margin(t_k, eps(t_k)) / mean H(t_k); default
// tolerance 0.02.
CheckReport check_pinching_preserved(const FlowTrace& trace, const PinchSchedule& schedule, double tolerance = 0.02);

struct Series {
  std::vector<double> t;
  std::vector<double> value;
};

CheckReport check_monotone(const Series& series, double tolerance = 1e-4);
// Bound checks skip the first sample, where the bound is an identity.
CheckReport check_decay_bound(const Series& series, double p, double eps0, double tolerance = 0.01);
CheckReport check_rescaled_monotone(const Series& rescaled, double p, double eps0, int n, double tolerance = 1e-4);
// lambda~(t) <= lambda~(0) exp[p int_0^t (1/n - eps(s)) ds].
CheckReport check_rescaled_schedule_bound(const Series& rescaled, double p, const PinchSchedule& schedule,
                                          double tolerance = 0.01);

// Symmetric form R(u_a, u_b) = -2 int f S(grad u_a, grad u_b) + int f H <grad u_a, grad u_b>
//                              - lambda_ab int f H u_a u_b
// over the columns of `functions`, with lambda_ab the mean of the two
// eigenvalues. Requires every column to be an eigenfunction with
// ||K u - lambda M u|| <= residual_tol ||M u||.
Eigen::MatrixXd evolution_form(const StarSurface& surface, const GeometryTensors& tensors, const DiscreteOperator& op,
                               const Eigen::MatrixXd& functions, const std::vector<double>& eigenvalues,
                               const SpeedFunction& speed, double residual_tol = 1e-6);

struct EvolutionOptions {
  double tolerance = 0.02;
  // Clusters wider than this (relative) but not degenerate make the
  // one-sided difference branch dependent.
  double gap_threshold = 1e-2;
  LaplaceOptions laplace;
};

// LHS (lambda1(t + dt) - lambda1(t)) / dt against the prediction of the
// evolution form; margin = tolerance - |LHS - RHS| / |RHS|, reported with
// tolerance field 0.
CheckReport evolution_residual(const StarSurface& now, const StarSurface& next, const SpeedFunction& speed,
                               const EvolutionOptions& options = {});

double convergence_radius(double area, int n);

// Sphericity of the rescaled snapshots after t_transient: must keep
// decreasing and fit log(sphericity) = a + b t with b < 0 and R^2 >= 0.9.
CheckReport check_rounding(const FlowTrace& trace, double t_transient = 0.0, double min_r_squared = 0.9);

double comparison_constant(int n, double p, double alpha);

struct ComparisonOptions {
  double tolerance = 0.005;
  LaplaceOptions laplace;
  PLaplaceConfig plaplace;
  // Equality-case detection threshold on 2/n - alpha.
  double equality_tolerance = 1e-3;
  // Pinching constant to use; unset means alpha_max(M). Must not exceed
  // alpha_max(M).
  std::optional<double> alpha;
};

// lambda_p(M) >= C^{-1} lambda_p(S^n(R)) with the sphere built on the same
// atlas and sized so that its discrete area equals area(M).
CheckReport check_sphere_comparison(const StarSurface& surface, double p, const ComparisonOptions& options = {});

// margin = tolerance - max_k |log(A_k / A_0) - t_k| (tolerance field 0).
CheckReport check_area_growth(const FlowTrace& trace, double tolerance = 0.01);

// Relative deviation of the fitted log H_max slope from -1/n; the comparison
// with the rate exp(-t) goes into the note and details.
CheckReport check_h_decay(const FlowTrace& trace, double t_from = 0.0, double tolerance = 0.2);

}  // namespace imcf
