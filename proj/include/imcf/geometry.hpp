#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace imcf {

enum class AtlasKind { Circle, Icosphere };

// Fixed set of unit directions over which a star-shaped hypersurface is
// stored as a radial field. n = 1 atlases are uniform circles (vertex i+1
// follows vertex i), n = 2 atlases are subdivided icosahedra.
class DirectionAtlas {
 public:
  // Per-vertex weighted least-squares stencil for the local quadric fit of
  // the radial function (n = 2 only). Rows of `fit` map (r_j - r_i) for the
  // listed neighbours to (r_x, r_y, r_xx, r_xy, r_yy) in gnomonic
  // coordinates of the tangent plane spanned by (e1, e2).
  struct FitStencil {
    std::vector<int> neighbours;
    Eigen::Matrix<double, 5, Eigen::Dynamic> fit;
    Eigen::Vector3d e1;
    Eigen::Vector3d e2;
  };

  int dimension() const { return dimension_; }
  AtlasKind kind() const { return kind_; }
  int resolution() const { return resolution_; }
  std::size_t size() const { return directions_.size(); }

  const std::vector<Eigen::Vector3d>& directions() const { return directions_; }
  const Eigen::Vector3d& direction(std::size_t i) const { return directions_[i]; }

  // Outward-oriented triangles (empty for n = 1).
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  // Cyclic successor of each vertex (n = 1); empty for n = 2.
  const std::vector<int>& successors() const { return successors_; }
  const std::vector<std::vector<int>>& one_rings() const { return one_rings_; }
  const std::vector<FitStencil>& stencils() const { return stencils_; }

  // Angular step of the uniform circle parameter (n = 1).
  double angle_step() const;

  std::size_t edge_count() const;
  int euler_characteristic() const;

  friend std::shared_ptr<const DirectionAtlas> build_atlas(AtlasKind, int);

 private:
  DirectionAtlas() = default;
  void build_rings_and_stencils();

  int dimension_ = 0;
  AtlasKind kind_ = AtlasKind::Circle;
  int resolution_ = 0;
  std::vector<Eigen::Vector3d> directions_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<int> successors_;
  std::vector<std::vector<int>> one_rings_;
  std::vector<FitStencil> stencils_;
};

using AtlasPtr = std::shared_ptr<const DirectionAtlas>;

// circle: `resolution` points; icosphere: subdivision level `resolution`
// (10 * 4^L + 2 vertices). Level 0 is allowed for the icosphere.
AtlasPtr build_atlas(AtlasKind kind, int resolution);

struct SphereProfile {
  double radius = 1.0;
};
struct EllipsoidProfile {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;  // ignored for curves
};
struct PerturbedSphereProfile {
  double radius = 1.0;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
};
using RadialProfile = std::variant<SphereProfile, EllipsoidProfile, PerturbedSphereProfile>;

std::string describe(const RadialProfile& profile);

// Closed star-shaped hypersurface X_i = r_i * theta_i at flow time t.
struct StarSurface {
  AtlasPtr atlas;
  Eigen::VectorXd radii;
  double time = 0.0;

  int dimension() const { return atlas->dimension(); }
  std::size_t size() const { return static_cast<std::size_t>(radii.size()); }
  Eigen::Vector3d position(std::size_t i) const { return radii[static_cast<Eigen::Index>(i)] * atlas->direction(i); }
};

// Throws invalid-argument for nonpositive axes / radius and degenerate-shape
// when a perturbation could reach r <= 0.
StarSurface embed(const AtlasPtr& atlas, const RadialProfile& profile);

// Validates r_i > 0 and finite; throws star-shape-loss otherwise.
StarSurface make_surface(const AtlasPtr& atlas, Eigen::VectorXd radii, double time = 0.0);

struct GeometryTensors {
  int dimension = 0;
  std::vector<Eigen::Vector3d> normals;
  Eigen::VectorXd mean_curvature;      // H = sum of principal curvatures
  Eigen::MatrixXd principal;           // N x n, ascending per row
  Eigen::VectorXd second_form_norm2;   // |A|^2
  Eigen::VectorXd dual_area;           // mixed Voronoi (n=2) / arclength (n=1)
  Eigen::VectorXd graph_factor;        // v = 1 / <nu, theta>
  Eigen::VectorXd spacing;             // mean incident edge length
  // Second fundamental form as an ambient tangent tensor: for tangent w,
  // II(w, w) = w^T S w.
  std::vector<Eigen::Matrix3d> shape_operator;

  std::size_t size() const { return static_cast<std::size_t>(mean_curvature.size()); }
  double min_principal(std::size_t i) const { return principal(static_cast<Eigen::Index>(i), 0); }
};

GeometryTensors compute_tensors(const StarSurface& surface);

double total_area(const StarSurface& surface, const GeometryTensors& tensors);

// min_i min(r_i, 1 / v_i); positive iff safely star-shaped.
double star_margin(const StarSurface& surface, const GeometryTensors& tensors);

// Mean curvature from the cotangent mean-curvature normal divided by the
// mixed Voronoi area (n = 2). Independent of the quadric fit; used to
// cross-check compute_tensors.
Eigen::VectorXd cotan_mean_curvature(const StarSurface& surface);

// Per-triangle areas and mixed Voronoi vertex areas (n = 2). Throws
// degenerate-mesh naming the first triangle whose area falls below
// 1e-14 * mean.
struct TriangleAreas {
  Eigen::VectorXd triangle;
  Eigen::VectorXd vertex;
};
TriangleAreas triangle_areas(const StarSurface& surface);

// Arclength of each segment (i, successor(i)) (n = 1).
Eigen::VectorXd segment_lengths(const StarSurface& surface);

// Area of the unit sphere S^n (2*pi for n = 1, 4*pi for n = 2).
double unit_sphere_area(int n);

}  // namespace imcf
