#include "imcf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "imcf/error.hpp"
#include "imcf/random.hpp"

namespace imcf {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Solver = Eigen::SimplicialLDLT<SparseMatrix>;

std::vector<Element> surface_elements(const StarSurface& surface) {
  const auto& atlas = *surface.atlas;
  std::vector<Element> elements;
  if (surface.dimension() == 1) {
    const Eigen::VectorXd seg = segment_lengths(surface);
    elements.reserve(surface.size());
    for (std::size_t i = 0; i < surface.size(); ++i) {
      const int j = atlas.successors()[i];
      const Eigen::Vector3d chord = surface.position(static_cast<std::size_t>(j)) - surface.position(i);
      const Eigen::Vector3d t = chord.normalized();
      const double s = seg[static_cast<Eigen::Index>(i)];
      Element e;
      e.vertices = {static_cast<int>(i), j, 0};
      e.count = 2;
      e.gradients = {-t / s, t / s, Eigen::Vector3d::Zero()};
      e.measure = s;
      elements.push_back(e);
    }
    return elements;
  }
  triangle_areas(surface);  // degenerate-mesh check
  elements.reserve(atlas.triangles().size());
  for (const auto& tri : atlas.triangles()) {
    const Eigen::Vector3d xa = surface.position(static_cast<std::size_t>(tri[0]));
    const Eigen::Vector3d xb = surface.position(static_cast<std::size_t>(tri[1]));
    const Eigen::Vector3d xc = surface.position(static_cast<std::size_t>(tri[2]));
    const Eigen::Vector3d normal = (xb - xa).cross(xc - xa);
    const double twice_area = normal.norm();
    const Eigen::Vector3d nhat = normal / twice_area;
    Element e;
    e.vertices = tri;
    e.count = 3;
    e.gradients = {nhat.cross(xc - xb) / twice_area, nhat.cross(xa - xc) / twice_area,
                   nhat.cross(xb - xa) / twice_area};
    e.measure = 0.5 * twice_area;
    elements.push_back(e);
  }
  return elements;
}

double mass_mean(const Eigen::VectorXd& mass, const Eigen::VectorXd& x) { return mass.dot(x) / mass.sum(); }

void deflate(const Eigen::VectorXd& mass, Eigen::MatrixXd& block) {
  const double total = mass.sum();
  for (Eigen::Index k = 0; k < block.cols(); ++k) block.col(k).array() -= mass.dot(block.col(k)) / total;
}

// Modified Gram-Schmidt in the M inner product, applied twice.
void m_orthonormalize(const Eigen::VectorXd& mass, Eigen::MatrixXd& block) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index k = 0; k < block.cols(); ++k) {
      for (Eigen::Index j = 0; j < k; ++j)
        block.col(k) -= block.col(j).cwiseProduct(mass).dot(block.col(k)) * block.col(j);
      const double norm = std::sqrt(block.col(k).cwiseProduct(mass).dot(block.col(k)));
      if (!(norm > 0.0)) throw Error(ErrorKind::SolverFailure, "subspace collapsed during orthonormalization");
      block.col(k) /= norm;
    }
  }
}

double spectral_scale(const DiscreteOperator& op) {
  return std::pow(op.mass.sum(), -2.0 / op.dimension);
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> u) {
  Eigen::Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  if (u[imax] < 0.0) u = -u;
}

double signed_pow(double x, double e) { return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), e), x); }

}  // namespace

DiscreteOperator assemble(const StarSurface& surface, const GeometryTensors& tensors) {
  DiscreteOperator op;
  op.dimension = surface.dimension();
  op.elements = surface_elements(surface);
  op.mass = tensors.dual_area;
  const auto n = static_cast<Eigen::Index>(surface.size());
  if (op.mass.size() != n) throw Error(ErrorKind::InvalidArgument, "tensors do not match the surface");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(op.mass[i] > 0.0)) throw Error(ErrorKind::DegenerateMesh, "nonpositive dual area at vertex " + std::to_string(i));

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd diagonal = Eigen::VectorXd::Zero(n);
  for (const auto& e : op.elements) {
    for (int a = 0; a < e.count; ++a) {
      for (int b = a + 1; b < e.count; ++b) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        const double k = e.measure * e.gradients[ua].dot(e.gradients[ub]);
        triplets.emplace_back(e.vertices[ua], e.vertices[ub], k);
        triplets.emplace_back(e.vertices[ub], e.vertices[ua], k);
        diagonal[e.vertices[ua]] -= k;
        diagonal[e.vertices[ub]] -= k;
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), diagonal[i]);
  op.stiffness.resize(n, n);
  op.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  op.stiffness.makeCompressed();
  return op;
}

EigenResult lambda1_laplace(const DiscreteOperator& op, double tol) {
  LaplaceOptions options;
  options.tol = tol;
  return lambda1_laplace(op, options);
}

EigenResult lambda1_laplace(const DiscreteOperator& op, const LaplaceOptions& options) {
  const Eigen::Index n = op.size();
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "operator needs at least 3 vertices");
  if (!(options.tol > 0.0) || options.max_iterations < 1)
    throw Error(ErrorKind::InvalidArgument, "tolerance and iteration budget must be positive");
  const Eigen::Index block = std::min<Eigen::Index>(std::max(options.block, 2), n - 1);

  const double scale = spectral_scale(op);
  const double sigma = 0.1 * scale;
  SparseMatrix shifted = op.stiffness;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += sigma * op.mass[i];
  Solver solver(shifted);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "factorization of K + sigma M failed");

  std::mt19937_64 rng(split_seed(options.seed, SeedStream::Eigensolver));
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  deflate(op.mass, x);
  m_orthonormalize(op.mass, x);

  EigenResult result;
  Eigen::VectorXd ritz;
  Eigen::VectorXd residuals;
  int iteration = 0;
  bool converged = false;
  std::size_t cluster_size = 1;
  while (iteration < options.max_iterations) {
    ++iteration;
    Eigen::MatrixXd y = solver.solve(op.mass.asDiagonal() * x);
    deflate(op.mass, y);
    m_orthonormalize(op.mass, y);
    const Eigen::MatrixXd ky = op.stiffness * y;
    Eigen::MatrixXd reduced = y.transpose() * ky;
    reduced = 0.5 * (reduced + reduced.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rr(reduced);
    ritz = rr.eigenvalues();
    x = y * rr.eigenvectors();
    const Eigen::MatrixXd kx = ky * rr.eigenvectors();

    residuals.resize(block);
    for (Eigen::Index k = 0; k < block; ++k) {
      const Eigen::VectorXd mx = op.mass.cwiseProduct(x.col(k));
      residuals[k] = (kx.col(k) - ritz[k] * mx).norm() / mx.norm();
    }
    if (ritz[0] <= 1e-8 * scale)
      throw Error(ErrorKind::DegenerateSpectrum, "smallest nonconstant Ritz value " + std::to_string(ritz[0]) +
                                                     " is numerically zero");
    cluster_size = 1;
    while (static_cast<Eigen::Index>(cluster_size) < block - 2 &&
           ritz[static_cast<Eigen::Index>(cluster_size)] <= ritz[0] * (1.0 + options.cluster_window))
      ++cluster_size;
    if (residuals.head(static_cast<Eigen::Index>(cluster_size)).maxCoeff() <= options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw Error(ErrorKind::SolverFailure, "eigensolver did not converge in " + std::to_string(iteration) +
                                              " iterations (residual " + std::to_string(residuals[0]) + ")");

  const auto m = static_cast<Eigen::Index>(cluster_size);
  result.p = 2.0;
  result.eigenvalue = ritz[0];
  result.eigenfunction = x.col(0);
  fix_sign(result.eigenfunction);
  result.residual = residuals[0];
  result.iterations = iteration;
  result.cluster.assign(ritz.data(), ritz.data() + m);
  result.cluster_vectors = x.leftCols(m);
  result.cluster_vectors.col(0) = result.eigenfunction;
  const Eigen::VectorXd& u = result.eigenfunction;
  result.normalization_error = std::abs(op.mass.dot(u.cwiseProduct(u)) - 1.0);
  result.orthogonality_error = std::abs(op.mass.dot(u));
  return result;
}

double p_energy(const DiscreteOperator& op, const Eigen::VectorXd& u, double p) {
  double total = 0.0;
  for (const auto& e : op.elements) total += e.measure * std::pow(e.gradient(u).norm(), p);
  return total;
}

double p_mass(const DiscreteOperator& op, const Eigen::VectorXd& u, double p) {
  return op.mass.dot(u.cwiseAbs().array().pow(p).matrix());
}

double rayleigh_p(const DiscreteOperator& op, const Eigen::VectorXd& u, double p) {
  if (u.size() != op.size()) throw Error(ErrorKind::InvalidArgument, "function does not match the operator");
  if (!(p > 1.0)) throw Error(ErrorKind::InvalidArgument, "p must exceed 1");
  const double g = p_mass(op, u, p);
  if (!(g > 0.0)) throw Error(ErrorKind::InvalidArgument, "function has zero p-mass");
  return p_energy(op, u, p) / g;
}

double rayleigh_p(const StarSurface& surface, const GeometryTensors& tensors, const Eigen::VectorXd& u, double p) {
  return rayleigh_p(assemble(surface, tensors), u, p);
}

Eigen::VectorXd project_p(const Eigen::VectorXd& weights, const Eigen::VectorXd& u, double p) {
  auto h = [&](double c, double& slope) {
    double value = 0.0;
    slope = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double d = u[i] - c;
      const double a = std::abs(d);
      if (a == 0.0) continue;
      const double pw = std::pow(a, p - 2.0);
      value += weights[i] * pw * d;
      slope -= (p - 1.0) * weights[i] * pw;
    }
    return value;
  };
  double lo = u.minCoeff(), hi = u.maxCoeff();
  double c = mass_mean(weights, u);
  double slope = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(c)); ++it) {
    const double value = h(c, slope);
    if (value == 0.0) break;
    if (value > 0.0)
      lo = c;
    else
      hi = c;
    double next = slope < 0.0 ? c - value / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - c) <= 1e-16 * std::max(1.0, std::abs(c))) {
      c = next;
      break;
    }
    c = next;
  }
  Eigen::VectorXd v = u.array() - c;
  const double g = weights.dot(v.cwiseAbs().array().pow(p).matrix());
  if (!(g > 0.0)) throw Error(ErrorKind::InvalidArgument, "cannot project a constant function");
  v /= std::pow(g, 1.0 / p);
  return v;
}

void PLaplaceConfig::validate() const {
  if (!(p > 1.0)) throw Error(ErrorKind::InvalidArgument, "p must exceed 1, got " + std::to_string(p));
  if (restarts < 3) throw Error(ErrorKind::InvalidArgument, "at least 3 restarts are required");
  if (max_iterations < 1 || !(gradient_tol > 0.0) || memory < 1 || max_backtracks < 1)
    throw Error(ErrorKind::InvalidArgument, "invalid p-Laplace iteration settings");
  if (!(armijo > 0.0 && armijo < 1.0) || !(backtrack > 0.0 && backtrack < 1.0))
    throw Error(ErrorKind::InvalidArgument, "line search parameters must lie in (0, 1)");
}

namespace {

// Gradient of F/G at a point with G = 1.
Eigen::VectorXd quotient_gradient(const DiscreteOperator& op, const Eigen::VectorXd& u, double p, double value) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(u.size());
  for (const auto& e : op.elements) {
    const Eigen::Vector3d g = e.gradient(u);
    const double norm = g.norm();
    if (norm == 0.0) continue;
    const double factor = p * e.measure * std::pow(norm, p - 2.0);
    for (int k = 0; k < e.count; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      grad[e.vertices[uk]] += factor * g.dot(e.gradients[uk]);
    }
  }
  for (Eigen::Index i = 0; i < u.size(); ++i) grad[i] -= value * p * op.mass[i] * signed_pow(u[i], p - 1.0);
  return grad;
}

struct Descent {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd u;
  int iterations = 0;
  bool moved = false;
};

Descent descend(const DiscreteOperator& op, const Solver& precond, Eigen::VectorXd u, const PLaplaceConfig& cfg) {
  const double p = cfg.p;
  u = project_p(op.mass, u, p);
  double value = p_energy(op, u, p);
  Eigen::VectorXd grad = quotient_gradient(op, u, p, value);
  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho;
  Descent out;
  int stalls = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    out.iterations = it + 1;
    // Two-loop recursion with the Sobolev preconditioner as initial inverse Hessian.
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    Eigen::VectorXd r = precond.solve(q);
    if (!s_hist.empty()) {
      const Eigen::VectorXd py = precond.solve(y_hist.back());
      r *= s_hist.back().dot(y_hist.back()) / y_hist.back().dot(py);
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho[k] * y_hist[k].dot(r);
      r += (alpha[k] - beta) * s_hist[k];
    }
    Eigen::VectorXd dir = -r;
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho.clear();
      dir = -precond.solve(grad);
      slope = grad.dot(dir);
    }
    if (!(slope < 0.0) || -slope <= cfg.gradient_tol * cfg.gradient_tol * value) break;

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_value = 0.0;
    for (int b = 0; b < cfg.max_backtracks; ++b) {
      trial = project_p(op.mass, u + step * dir, p);
      trial_value = p_energy(op, trial, p);
      if (std::isfinite(trial_value) && trial_value <= value + cfg.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      if (s_hist.empty()) break;
      s_hist.clear();
      y_hist.clear();
      rho.clear();
      continue;
    }
    out.moved = true;
    const Eigen::VectorXd next_grad = quotient_gradient(op, trial, p, trial_value);
    const Eigen::VectorXd s = trial - u;
    const Eigen::VectorXd y = next_grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > cfg.memory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho.erase(rho.begin());
      }
    }
    stalls = (value - trial_value <= 1e-15 * value) ? stalls + 1 : 0;
    u = trial;
    value = trial_value;
    grad = next_grad;
    if (stalls >= 5) break;
  }
  out.value = value;
  out.u = u;
  return out;
}

}  // namespace

EigenResult lambda1_plaplace(const DiscreteOperator& op, const PLaplaceConfig& cfg) {
  cfg.validate();
  LaplaceOptions lopt;
  lopt.seed = cfg.seed;
  const EigenResult laplace = lambda1_laplace(op, lopt);

  SparseMatrix shifted = op.stiffness;
  for (Eigen::Index i = 0; i < op.size(); ++i) shifted.coeffRef(i, i) += laplace.eigenvalue * op.mass[i];
  Solver precond(shifted);
  if (precond.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "preconditioner factorization failed");

  std::mt19937_64 rng(split_seed(cfg.seed, SeedStream::PLaplace));
  std::normal_distribution<double> normal;
  EigenResult result;
  result.p = cfg.p;
  result.upper_bound = cfg.p != 2.0;
  Descent best;
  int moved = 0;
  for (int r = 0; r < cfg.restarts; ++r) {
    Eigen::VectorXd start;
    if (r == 0) {
      start = laplace.eigenfunction;
    } else {
      start.resize(op.size());
      for (Eigen::Index i = 0; i < start.size(); ++i) start[i] = normal(rng);
      for (int k = 0; k < 2; ++k) start = precond.solve(op.mass.cwiseProduct(start));
    }
    Descent d = descend(op, precond, start, cfg);
    result.restart_values.push_back(d.value);
    result.iterations += d.iterations;
    if (d.moved || r == 0) ++moved;
    if (d.value < best.value) best = std::move(d);
  }
  if (moved == 0 || !std::isfinite(best.value))
    throw Error(ErrorKind::SolverFailure, "every p-Laplace restart failed its line search");
  result.restarts = cfg.restarts;
  result.eigenvalue = best.value;
  result.eigenfunction = best.u;
  fix_sign(result.eigenfunction);
  const Eigen::VectorXd& u = result.eigenfunction;
  result.residual = quotient_gradient(op, u, cfg.p, best.value).norm();
  result.normalization_error = std::abs(p_mass(op, u, cfg.p) - 1.0);
  double orth = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) orth += op.mass[i] * signed_pow(u[i], cfg.p - 1.0);
  result.orthogonality_error = std::abs(orth);
  return result;
}

EigenResult lambda1_plaplace(const StarSurface& surface, const GeometryTensors& tensors, const PLaplaceConfig& cfg) {
  cfg.validate();
  return lambda1_plaplace(assemble(surface, tensors), cfg);
}

double circle_plaplace_exact(double length, double p) {
  if (!(length > 0.0) || !(p > 1.0)) throw Error(ErrorKind::InvalidArgument, "need L > 0 and p > 1");
  const double pi_p = 2.0 * std::numbers::pi / (p * std::sin(std::numbers::pi / p));
  return (p - 1.0) * std::pow(2.0 * pi_p / length, p);
}

}  // namespace imcf
