#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "imcf/geometry.hpp"

namespace imcf {

// Linear element: a segment (count = 2) or a flat triangle (count = 3),
// with the constant gradients of its hat functions.
struct Element {
  std::array<int, 3> vertices{};
  int count = 0;
  std::array<Eigen::Vector3d, 3> gradients{};
  double measure = 0.0;

  // Written in differences to the first vertex so constants map to exactly 0.
  Eigen::Vector3d gradient(const Eigen::VectorXd& u) const {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    const double base = u[vertices[0]];
    for (int k = 1; k < count; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      g += (u[vertices[uk]] - base) * gradients[uk];
    }
    return g;
  }
};

struct DiscreteOperator {
  int dimension = 0;
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd mass;
  std::vector<Element> elements;

  Eigen::Index size() const { return mass.size(); }
};

DiscreteOperator assemble(const StarSurface& surface, const GeometryTensors& tensors);

struct EigenResult {
  double p = 2.0;
  double eigenvalue = 0.0;
  Eigen::VectorXd eigenfunction;
  double residual = 0.0;
  int iterations = 0;
  int restarts = 0;
  bool upper_bound = false;
  double normalization_error = 0.0;
  double orthogonality_error = 0.0;
  // p = 2: Ritz values within the cluster window of the smallest one and
  // their M-orthonormal vectors (columns).
  std::vector<double> cluster;
  Eigen::MatrixXd cluster_vectors;
  // p != 2: best value reached by each restart (warm start first).
  std::vector<double> restart_values;

  double cluster_width() const { return cluster.empty() ? 0.0 : cluster.back() - cluster.front(); }
};

struct LaplaceOptions {
  double tol = 1e-8;
  int max_iterations = 500;
  int block = 8;
  double cluster_window = 0.05;
  std::uint64_t seed = 0;
};

// Smallest nonzero eigenvalue of K u = lambda M u on the complement of the
// constants, by shift-invert block subspace iteration.
EigenResult lambda1_laplace(const DiscreteOperator& op, const LaplaceOptions& options = {});
EigenResult lambda1_laplace(const DiscreteOperator& op, double tol);

// Discrete p-Dirichlet energy sum_e |e| |grad u|^p and p-mass sum_i w_i |u_i|^p.
double p_energy(const DiscreteOperator& op, const Eigen::VectorXd& u, double p);
double p_mass(const DiscreteOperator& op, const Eigen::VectorXd& u, double p);

double rayleigh_p(const DiscreteOperator& op, const Eigen::VectorXd& u, double p);
double rayleigh_p(const StarSurface& surface, const GeometryTensors& tensors, const Eigen::VectorXd& u, double p);

// Returns u - c with c the unique root of sum_i w_i |u_i - c|^{p-2}(u_i - c) = 0,
// rescaled so that sum_i w_i |u_i|^p = 1.
Eigen::VectorXd project_p(const Eigen::VectorXd& weights, const Eigen::VectorXd& u, double p);

struct PLaplaceConfig {
  double p = 3.0;
  int max_iterations = 3000;
  double gradient_tol = 1e-9;
  int restarts = 4;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
  int memory = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Best of cfg.restarts preconditioned descents of the p-Rayleigh quotient on
// the constraint set; the first restart starts from the p = 2 eigenfunction.
// The result is an upper bound on the discrete minimum.
EigenResult lambda1_plaplace(const DiscreteOperator& op, const PLaplaceConfig& cfg);
EigenResult lambda1_plaplace(const StarSurface& surface, const GeometryTensors& tensors, const PLaplaceConfig& cfg);

struct OracleResult {
  double value = 0.0;
  // (max - min) / min over all restarts.
  double dispersion = 0.0;
  double gradient_norm = 0.0;
  std::vector<double> restart_values;
  Eigen::VectorXd minimizer;
};

// Quotient on a uniform N-point circle of circumference L, evaluated with its
// own formula (no dependence on the mesh code).
double circle_quotient(double length, double p, const Eigen::VectorXd& u);

OracleResult circle_plaplace_oracle_run(double length, double p, int n, std::uint64_t seed = 0, int restarts = 12);
double circle_plaplace_oracle(double length, double p, int n, std::uint64_t seed = 0);

// Closed form of the smooth first p-eigenvalue of a circle of length L:
// (p - 1) (2 pi_p / L)^p with pi_p = 2 pi / (p sin(pi / p)).
double circle_plaplace_exact(double length, double p);

}  // namespace imcf
