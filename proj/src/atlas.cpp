#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <utility>

#include <Eigen/Dense>

#include "imcf/error.hpp"
#include "imcf/geometry.hpp"

namespace imcf {
namespace {

using Triangle = std::array<int, 3>;

void icosahedron(std::vector<Eigen::Vector3d>& verts, std::vector<Triangle>& tris) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  verts = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
           {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
           {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
          {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
          {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
          {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
}

void subdivide(std::vector<Eigen::Vector3d>& verts, std::vector<Triangle>& tris) {
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
    verts.push_back((verts[a] + verts[b]).normalized());
    const int idx = static_cast<int>(verts.size()) - 1;
    midpoint.emplace(key, idx);
    return idx;
  };
  std::vector<Triangle> refined;
  refined.reserve(tris.size() * 4);
  for (const auto& t : tris) {
    const int ab = mid(t[0], t[1]);
    const int bc = mid(t[1], t[2]);
    const int ca = mid(t[2], t[0]);
    refined.push_back({t[0], ab, ca});
    refined.push_back({t[1], bc, ab});
    refined.push_back({t[2], ca, bc});
    refined.push_back({ab, bc, ca});
  }
  tris = std::move(refined);
}

void tangent_frame(const Eigen::Vector3d& theta, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  if (std::abs(theta.x()) > 0.6) axis = Eigen::Vector3d::UnitY();
  e1 = axis.cross(theta).normalized();
  e2 = theta.cross(e1);  // (e1, e2, theta) right-handed
}

}  // namespace

double DirectionAtlas::angle_step() const {
  return 2.0 * std::numbers::pi / static_cast<double>(directions_.size());
}

std::size_t DirectionAtlas::edge_count() const {
  if (dimension_ == 1) return directions_.size();
  std::set<std::pair<int, int>> edges;
  for (const auto& t : triangles_)
    for (int k = 0; k < 3; ++k) edges.insert(std::minmax(t[k], t[(k + 1) % 3]));
  return edges.size();
}

int DirectionAtlas::euler_characteristic() const {
  if (dimension_ == 1) return 0;
  return static_cast<int>(directions_.size()) - static_cast<int>(edge_count()) +
         static_cast<int>(triangles_.size());
}

void DirectionAtlas::build_rings_and_stencils() {
  const std::size_t n = directions_.size();
  std::vector<std::set<int>> ring(n);
  for (const auto& t : triangles_)
    for (int k = 0; k < 3; ++k) {
      ring[t[k]].insert(t[(k + 1) % 3]);
      ring[t[k]].insert(t[(k + 2) % 3]);
    }
  one_rings_.resize(n);
  for (std::size_t i = 0; i < n; ++i) one_rings_[i].assign(ring[i].begin(), ring[i].end());

  stencils_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d& theta = directions_[i];
    FitStencil& st = stencils_[i];
    tangent_frame(theta, st.e1, st.e2);

    std::set<int> two_ring(ring[i].begin(), ring[i].end());
    for (int j : ring[i]) two_ring.insert(ring[j].begin(), ring[j].end());
    two_ring.erase(static_cast<int>(i));
    for (int j : two_ring)
      if (directions_[j].dot(theta) > 0.3) st.neighbours.push_back(j);
    if (st.neighbours.size() < 5) st.neighbours.assign(ring[i].begin(), ring[i].end());
    if (st.neighbours.size() < 5)
      throw Error(ErrorKind::DegenerateMesh, "vertex " + std::to_string(i) + " has fewer than 5 fit neighbours");

    const auto m = static_cast<Eigen::Index>(st.neighbours.size());
    Eigen::MatrixXd design(m, 5);
    Eigen::VectorXd weight(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Vector3d& d = directions_[st.neighbours[k]];
      const double x = d.dot(st.e1) / d.dot(theta);
      const double y = d.dot(st.e2) / d.dot(theta);
      design.row(k) << x, y, 0.5 * x * x, x * y, 0.5 * y * y;
      weight[k] = 1.0 / (x * x + y * y);
    }
    const Eigen::MatrixXd wa = weight.asDiagonal() * design;
    const Eigen::Matrix<double, 5, 5> normal = design.transpose() * wa;
    st.fit = normal.ldlt().solve(wa.transpose());
  }
}

AtlasPtr build_atlas(AtlasKind kind, int resolution) {
  if (kind == AtlasKind::Circle && resolution < 1)
    throw Error(ErrorKind::InvalidArgument, "circle atlas needs at least one point");
  if (kind == AtlasKind::Icosphere && resolution < 0)
    throw Error(ErrorKind::InvalidArgument, "icosphere level must be nonnegative");
  if (kind == AtlasKind::Icosphere && resolution > 8)
    throw Error(ErrorKind::InvalidArgument, "icosphere level above 8 is not supported");

  std::shared_ptr<DirectionAtlas> atlas(new DirectionAtlas());
  atlas->kind_ = kind;
  atlas->resolution_ = resolution;
  if (kind == AtlasKind::Circle) {
    atlas->dimension_ = 1;
    const auto n = static_cast<std::size_t>(resolution);
    atlas->directions_.resize(n);
    atlas->successors_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      atlas->directions_[i] = {std::cos(phi), std::sin(phi), 0.0};
      atlas->successors_[i] = static_cast<int>((i + 1) % n);
    }
    // Exact values on the axes keep the uniform 4-point circle exact.
    for (auto& d : atlas->directions_)
      for (int k = 0; k < 2; ++k)
        if (std::abs(d[k]) < 1e-15) d[k] = 0.0;
    return atlas;
  }

  atlas->dimension_ = 2;
  icosahedron(atlas->directions_, atlas->triangles_);
  for (int level = 0; level < resolution; ++level) subdivide(atlas->directions_, atlas->triangles_);
  for (auto& t : atlas->triangles_) {
    const auto& a = atlas->directions_[t[0]];
    const auto& b = atlas->directions_[t[1]];
    const auto& c = atlas->directions_[t[2]];
    if ((b - a).cross(c - a).dot(a + b + c) < 0.0) std::swap(t[1], t[2]);
  }
  atlas->build_rings_and_stencils();
  return atlas;
}

}  // namespace imcf
