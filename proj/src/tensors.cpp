#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "imcf/error.hpp"
#include "imcf/geometry.hpp"

namespace imcf {
namespace {

struct CurveDerivatives {
  Eigen::VectorXd d1;
  Eigen::VectorXd d2;
};

// Fourth-order central differences in the uniform angle parameter.
CurveDerivatives curve_derivatives(const Eigen::VectorXd& r, double h) {
  const auto n = r.size();
  CurveDerivatives out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  auto at = [&](Eigen::Index i) { return r[((i % n) + n) % n]; };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m2 = at(i - 2), m1 = at(i - 1), p1 = at(i + 1), p2 = at(i + 2);
    out.d1[i] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    out.d2[i] = (-p2 + 16.0 * p1 - 30.0 * r[i] + 16.0 * m1 - m2) / (12.0 * h * h);
  }
  return out;
}

Eigen::VectorXd curve_segments(const Eigen::VectorXd& r, const CurveDerivatives& d, double h) {
  // 4-point Gauss-Legendre on the cubic Hermite interpolant of r(phi).
  static constexpr std::array<double, 4> nodes = {0.0694318442029737, 0.3300094782075719,
                                                  0.6699905217924281, 0.9305681557970263};
  static constexpr std::array<double, 4> weights = {0.1739274225687269, 0.3260725774312731,
                                                    0.3260725774312731, 0.1739274225687269};
  const auto n = r.size();
  Eigen::VectorXd seg(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = (i + 1) % n;
    const double p0 = r[i], p1 = r[j], m0 = d.d1[i] * h, m1 = d.d1[j] * h;
    double length = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double s = nodes[q], s2 = s * s, s3 = s2 * s;
      const double val = (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1;
      const double der = ((6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * p1 + (3 * s2 - 2 * s) * m1) / h;
      length += weights[q] * std::sqrt(val * val + der * der);
    }
    seg[i] = length * h;
  }
  return seg;
}

void check_segments(const Eigen::VectorXd& seg) {
  const double threshold = 1e-14 * seg.mean();
  for (Eigen::Index i = 0; i < seg.size(); ++i)
    if (!(seg[i] > threshold))
      throw Error(ErrorKind::DegenerateMesh, "segment " + std::to_string(i) + " has length " + std::to_string(seg[i]));
}

GeometryTensors curve_tensors(const StarSurface& surface) {
  const auto& atlas = *surface.atlas;
  const auto n = static_cast<Eigen::Index>(surface.size());
  if (n < 3) throw Error(ErrorKind::DegenerateMesh, "curve needs at least 3 vertices");
  const double h = atlas.angle_step();
  const Eigen::VectorXd& r = surface.radii;
  const CurveDerivatives d = curve_derivatives(r, h);
  const Eigen::VectorXd seg = curve_segments(r, d, h);
  check_segments(seg);

  GeometryTensors g;
  g.dimension = 1;
  g.normals.resize(static_cast<std::size_t>(n));
  g.shape_operator.resize(static_cast<std::size_t>(n));
  g.mean_curvature.resize(n);
  g.principal.resize(n, 1);
  g.second_form_norm2.resize(n);
  g.dual_area.resize(n);
  g.graph_factor.resize(n);
  g.spacing.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Eigen::Vector3d& theta = atlas.direction(k);
    const Eigen::Vector3d perp(-theta.y(), theta.x(), 0.0);
    const double speed2 = r[i] * r[i] + d.d1[i] * d.d1[i];
    const double speed = std::sqrt(speed2);
    const double kappa = (r[i] * r[i] + 2.0 * d.d1[i] * d.d1[i] - r[i] * d.d2[i]) / (speed2 * speed);
    const Eigen::Vector3d tangent = (d.d1[i] * theta + r[i] * perp) / speed;
    g.normals[k] = Eigen::Vector3d(tangent.y(), -tangent.x(), 0.0);
    g.shape_operator[k] = kappa * tangent * tangent.transpose();
    g.mean_curvature[i] = kappa;
    g.principal(i, 0) = kappa;
    g.second_form_norm2[i] = kappa * kappa;
    g.graph_factor[i] = speed / r[i];
    const Eigen::Index prev = (i + n - 1) % n;
    g.dual_area[i] = 0.5 * (seg[prev] + seg[i]);
    g.spacing[i] = 0.5 * (seg[prev] + seg[i]);
  }
  return g;
}

GeometryTensors surface_tensors(const StarSurface& surface) {
  const auto& atlas = *surface.atlas;
  const auto n = static_cast<Eigen::Index>(surface.size());
  const Eigen::VectorXd& r = surface.radii;
  const TriangleAreas areas = triangle_areas(surface);

  GeometryTensors g;
  g.dimension = 2;
  g.normals.resize(static_cast<std::size_t>(n));
  g.shape_operator.resize(static_cast<std::size_t>(n));
  g.mean_curvature.resize(n);
  g.principal.resize(n, 2);
  g.second_form_norm2.resize(n);
  g.dual_area = areas.vertex;
  g.graph_factor.resize(n);
  g.spacing.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto& st = atlas.stencils()[k];
    const Eigen::Vector3d& theta = atlas.direction(k);
    // Local quadric fit: q = (1 + x^2 + y^2) / r^2 is a quadratic polynomial in
    // the gnomonic coordinates exactly when X^T B X = 1 near the vertex.
    const double q0 = 1.0 / (r[i] * r[i]);
    Eigen::VectorXd diff(static_cast<Eigen::Index>(st.neighbours.size()));
    for (std::size_t j = 0; j < st.neighbours.size(); ++j) {
      const int nb = st.neighbours[j];
      const Eigen::Vector3d& d = atlas.direction(static_cast<std::size_t>(nb));
      const double cosine = d.dot(theta);
      diff[static_cast<Eigen::Index>(j)] = 1.0 / (cosine * cosine * r[nb] * r[nb]) - q0;
    }
    const Eigen::Matrix<double, 5, 1> c = st.fit * diff;
    // r = sqrt(1 + x^2 + y^2) * f with f = q^(-1/2).
    const double f = r[i];
    const double f3 = f * f * f, f5 = f3 * f * f;
    const double fx = -0.5 * f3 * c[0], fy = -0.5 * f3 * c[1];
    const double fxx = 0.75 * f5 * c[0] * c[0] - 0.5 * f3 * c[2];
    const double fxy = 0.75 * f5 * c[0] * c[1] - 0.5 * f3 * c[3];
    const double fyy = 0.75 * f5 * c[1] * c[1] - 0.5 * f3 * c[4];
    const double rv = f, rx = fx, ry = fy, rxx = f + fxx, rxy = fxy, ryy = f + fyy;

    // X(x, y) = r(x, y) (theta + x e1 + y e2) / sqrt(1 + x^2 + y^2)
    Eigen::Matrix<double, 3, 2> jac;
    jac.col(0) = rx * theta + rv * st.e1;
    jac.col(1) = ry * theta + rv * st.e2;
    const Eigen::Vector3d xxx = (rxx - rv) * theta + 2.0 * rx * st.e1;
    const Eigen::Vector3d xyy = (ryy - rv) * theta + 2.0 * ry * st.e2;
    const Eigen::Vector3d xxy = rxy * theta + rx * st.e2 + ry * st.e1;
    Eigen::Vector3d nu = jac.col(0).cross(jac.col(1)).normalized();
    if (nu.dot(theta) < 0.0) nu = -nu;

    const Eigen::Matrix2d first = jac.transpose() * jac;
    Eigen::Matrix2d second;
    second << -xxx.dot(nu), -xxy.dot(nu), -xxy.dot(nu), -xyy.dot(nu);

    const Eigen::Matrix2d ginv = first.inverse();
    const Eigen::Matrix2d weingarten = ginv * second;
    // Symmetric form L^-1 h L^-T shares eigenvalues with g^-1 h.
    const Eigen::LLT<Eigen::Matrix2d> chol(first);
    const Eigen::Matrix2d lower = chol.matrixL();
    const Eigen::Matrix2d linv = lower.inverse();
    const Eigen::Matrix2d sym = linv * second * linv.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(sym, Eigen::EigenvaluesOnly);

    g.normals[k] = nu;
    g.principal(i, 0) = eig.eigenvalues()[0];
    g.principal(i, 1) = eig.eigenvalues()[1];
    g.mean_curvature[i] = weingarten.trace();
    g.second_form_norm2[i] = (weingarten * weingarten).trace();
    g.graph_factor[i] = 1.0 / nu.dot(theta);
    g.shape_operator[k] = jac * ginv * second * ginv * jac.transpose();

    double edge_sum = 0.0;
    const auto& ring = atlas.one_rings()[k];
    for (int j : ring) edge_sum += (surface.position(static_cast<std::size_t>(j)) - surface.position(k)).norm();
    g.spacing[i] = edge_sum / static_cast<double>(ring.size());
  }
  return g;
}

}  // namespace

TriangleAreas triangle_areas(const StarSurface& surface) {
  const auto& tris = surface.atlas->triangles();
  const auto nt = static_cast<Eigen::Index>(tris.size());
  TriangleAreas out{Eigen::VectorXd(nt), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(surface.size()))};
  for (Eigen::Index f = 0; f < nt; ++f) {
    const auto& t = tris[static_cast<std::size_t>(f)];
    const Eigen::Vector3d a = surface.position(t[0]), b = surface.position(t[1]), c = surface.position(t[2]);
    out.triangle[f] = 0.5 * (b - a).cross(c - a).norm();
  }
  const double threshold = 1e-14 * out.triangle.mean();
  for (Eigen::Index f = 0; f < nt; ++f) {
    if (!(out.triangle[f] > threshold))
      throw Error(ErrorKind::DegenerateMesh, "triangle " + std::to_string(f) + " has area " + std::to_string(out.triangle[f]));
    const auto& t = tris[static_cast<std::size_t>(f)];
    std::array<Eigen::Vector3d, 3> p;
    for (int k = 0; k < 3; ++k) p[k] = surface.position(t[k]);
    const double area = out.triangle[f];
    int obtuse = -1;
    for (int k = 0; k < 3; ++k)
      if ((p[(k + 1) % 3] - p[k]).dot(p[(k + 2) % 3] - p[k]) < 0.0) obtuse = k;
    if (obtuse >= 0) {
      for (int k = 0; k < 3; ++k) out.vertex[t[k]] += (k == obtuse ? 0.5 : 0.25) * area;
      continue;
    }
    // Voronoi: the edge opposite vertex k carries cot(angle k) |e|^2 / 8 to both ends.
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d u = p[(k + 1) % 3] - p[k], w = p[(k + 2) % 3] - p[k];
      const double cot = u.dot(w) / u.cross(w).norm();
      const double e2 = (p[(k + 2) % 3] - p[(k + 1) % 3]).squaredNorm();
      out.vertex[t[(k + 1) % 3]] += cot * e2 / 8.0;
      out.vertex[t[(k + 2) % 3]] += cot * e2 / 8.0;
    }
  }
  return out;
}

Eigen::VectorXd segment_lengths(const StarSurface& surface) {
  if (surface.dimension() != 1) throw Error(ErrorKind::InvalidArgument, "segment lengths need a curve");
  if (surface.size() < 3) throw Error(ErrorKind::DegenerateMesh, "curve needs at least 3 vertices");
  const double h = surface.atlas->angle_step();
  Eigen::VectorXd seg = curve_segments(surface.radii, curve_derivatives(surface.radii, h), h);
  check_segments(seg);
  return seg;
}

GeometryTensors compute_tensors(const StarSurface& surface) {
  if (!surface.atlas) throw Error(ErrorKind::InvalidArgument, "surface without atlas");
  return surface.dimension() == 1 ? curve_tensors(surface) : surface_tensors(surface);
}

double total_area(const StarSurface&, const GeometryTensors& tensors) {
  // Pairwise summation keeps the reduction order fixed.
  std::vector<double> w(tensors.dual_area.data(), tensors.dual_area.data() + tensors.dual_area.size());
  while (w.size() > 1) {
    std::vector<double> next((w.size() + 1) / 2);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = w[2 * i] + (2 * i + 1 < w.size() ? w[2 * i + 1] : 0.0);
    w = std::move(next);
  }
  return w.empty() ? 0.0 : w.front();
}

double star_margin(const StarSurface& surface, const GeometryTensors& tensors) {
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < surface.radii.size(); ++i)
    margin = std::min({margin, surface.radii[i], 1.0 / tensors.graph_factor[i]});
  return margin;
}

Eigen::VectorXd cotan_mean_curvature(const StarSurface& surface) {
  if (surface.dimension() != 2) throw Error(ErrorKind::InvalidArgument, "cotan mean curvature needs a surface");
  const TriangleAreas areas = triangle_areas(surface);
  const auto n = static_cast<Eigen::Index>(surface.size());
  std::vector<Eigen::Vector3d> hn(static_cast<std::size_t>(n), Eigen::Vector3d::Zero());
  for (const auto& t : surface.atlas->triangles()) {
    std::array<Eigen::Vector3d, 3> p;
    for (int k = 0; k < 3; ++k) p[k] = surface.position(t[k]);
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d u = p[(k + 1) % 3] - p[k], w = p[(k + 2) % 3] - p[k];
      const double half_cot = 0.5 * u.dot(w) / u.cross(w).norm();
      const int a = t[(k + 1) % 3], b = t[(k + 2) % 3];
      const Eigen::Vector3d e = p[(k + 1) % 3] - p[(k + 2) % 3];
      hn[a] += half_cot * e;
      hn[b] -= half_cot * e;
    }
  }
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d& v = hn[static_cast<std::size_t>(i)];
    const double sign = v.dot(surface.atlas->direction(static_cast<std::size_t>(i))) >= 0.0 ? 1.0 : -1.0;
    h[i] = sign * v.norm() / areas.vertex[i];
  }
  return h;
}

}  // namespace imcf
