#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "imcf/error.hpp"
#include "imcf/random.hpp"
#include "imcf/spectral.hpp"

namespace imcf {

namespace {

struct Circle {
  double h;
  double p;
  int n;

  double energy(const Eigen::VectorXd& u) const {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += h * std::pow(std::abs((u[(i + 1) % n] - u[i]) / h), p);
    return total;
  }
  double mass(const Eigen::VectorXd& u) const {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += h * std::pow(std::abs(u[i]), p);
    return total;
  }
  // Minimizer of c -> sum |u - c|^p by bisection on the monotone derivative.
  double best_shift(const Eigen::VectorXd& u) const {
    double lo = u.minCoeff(), hi = u.maxCoeff();
    for (int it = 0; it < 200 && hi > lo; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      double d = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = u[i] - mid;
        d += std::copysign(std::pow(std::abs(x), p - 1.0), x);
      }
      (d > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
  // Shifted and scaled to unit p-mass.
  Eigen::VectorXd normalize(const Eigen::VectorXd& u) const {
    Eigen::VectorXd v = u.array() - best_shift(u);
    return v / std::pow(mass(v), 1.0 / p);
  }
  // Gradient of energy / mass at a normalized point.
  Eigen::VectorXd gradient(const Eigen::VectorXd& u, double value) const {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = -value * p * h * std::copysign(std::pow(std::abs(u[i]), p - 1.0), u[i]);
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      const double slope = (u[j] - u[i]) / h;
      const double flux = p * std::copysign(std::pow(std::abs(slope), p - 1.0), slope);
      g[j] += flux;
      g[i] -= flux;
    }
    return g;
  }
};

struct Minimum {
  double value;
  double gradient_norm;
  Eigen::VectorXd u;
};

Minimum lbfgs(const Circle& c, const Eigen::LLT<Eigen::MatrixXd>& precond, Eigen::VectorXd u) {
  u = c.normalize(u);
  double value = c.energy(u);
  Eigen::VectorXd g = c.gradient(u, value);
  std::deque<Eigen::VectorXd> ss, ys;
  double step0 = 1.0;
  double best_gradient = g.norm();
  int since_best = 0;
  for (int it = 0; it < 200000 && g.norm() > 1e-10 && since_best < 100; ++it) {
    Eigen::VectorXd q = g;
    std::vector<double> a(ss.size());
    for (std::size_t k = ss.size(); k-- > 0;) {
      a[k] = ss[k].dot(q) / ys[k].dot(ss[k]);
      q -= a[k] * ys[k];
    }
    q = precond.solve(q);
    if (!ss.empty()) q *= ss.back().dot(ys.back()) / ys.back().dot(precond.solve(ys.back()));
    for (std::size_t k = 0; k < ss.size(); ++k) q += (a[k] - ys[k].dot(q) / ys[k].dot(ss[k])) * ss[k];
    Eigen::VectorXd d = -q;
    if (!(g.dot(d) < 0.0)) {
      ss.clear();
      ys.clear();
      d = -precond.solve(g);
    }
    // Annealed first trial: steepest-descent steps start from the last accepted size.
    double t = ss.empty() ? step0 : 1.0;
    bool ok = false;
    Eigen::VectorXd next, ng;
    double next_value = 0.0;
    for (int b = 0; b < 60; ++b) {
      next = c.normalize(u + t * d);
      next_value = c.energy(next);
      if (next_value <= value + 1e-4 * t * g.dot(d)) {
        ok = true;
        break;
      }
      // Below round-off in the value, fall back to decrease of the gradient.
      if (next_value <= value + 1e-14 * value) {
        ng = c.gradient(next, next_value);
        if (ng.norm() < g.norm()) {
          ok = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!ok) {
      if (ss.empty()) break;
      ss.clear();
      ys.clear();
      continue;
    }
    if (ss.empty()) step0 = 2.0 * t;
    ng = c.gradient(next, next_value);
    const Eigen::VectorXd s = next - u, y = ng - g;
    if (s.dot(y) > 1e-16 * s.norm() * y.norm()) {
      ss.push_back(s);
      ys.push_back(y);
      if (ss.size() > 12) {
        ss.pop_front();
        ys.pop_front();
      }
    }
    u = next;
    value = next_value;
    g = ng;
    if (g.norm() < 0.99 * best_gradient) {
      best_gradient = g.norm();
      since_best = 0;
    } else {
      ++since_best;
    }
  }
  return {value, g.norm(), u};
}

}  // namespace

double circle_quotient(double length, double p, const Eigen::VectorXd& u) {
  const Circle c{length / static_cast<double>(u.size()), p, static_cast<int>(u.size())};
  return c.energy(u) / c.mass(u);
}

OracleResult circle_plaplace_oracle_run(double length, double p, int n, std::uint64_t seed, int restarts) {
  if (!(length > 0.0) || !(p > 1.0) || n < 64)
    throw Error(ErrorKind::InvalidArgument, "oracle needs L > 0, p > 1 and N >= 64");
  const Circle c{length / n, p, n};
  // Dense periodic H^1 Gram matrix as the initial inverse-Hessian metric.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    gram(i, i) += 2.0 / c.h + c.h;
    gram(i, j) -= 1.0 / c.h;
    gram(j, i) -= 1.0 / c.h;
  }
  const Eigen::LLT<Eigen::MatrixXd> precond(gram);
  std::mt19937_64 rng(split_seed(seed, SeedStream::Oracle));
  std::normal_distribution<double> normal;
  OracleResult out;
  out.value = std::numeric_limits<double>::infinity();
  for (int r = 0; r <= std::max(restarts, 1); ++r) {
    Eigen::VectorXd u(n);
    if (r == 0) {
      for (int i = 0; i < n; ++i) u[i] = std::sin(2.0 * std::numbers::pi * i / n);
    } else {
      const double a1 = normal(rng), b1 = normal(rng), a2 = normal(rng), b2 = normal(rng);
      for (int i = 0; i < n; ++i) {
        const double s = 2.0 * std::numbers::pi * i / n;
        u[i] = a1 * std::cos(s) + b1 * std::sin(s) + 0.5 * (a2 * std::cos(2 * s) + b2 * std::sin(2 * s)) + 0.1 * normal(rng);
      }
    }
    const Minimum m = lbfgs(c, precond, u);
    out.restart_values.push_back(m.value);
    if (m.value < out.value) {
      out.value = m.value;
      out.gradient_norm = m.gradient_norm;
      out.minimizer = m.u;
    }
  }
  const auto [lo, hi] = std::minmax_element(out.restart_values.begin(), out.restart_values.end());
  out.dispersion = (*hi - *lo) / *lo;
  return out;
}

double circle_plaplace_oracle(double length, double p, int n, std::uint64_t seed) {
  return circle_plaplace_oracle_run(length, p, n, seed).value;
}

}  // namespace imcf
