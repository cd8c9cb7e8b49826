#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "imcf/error.hpp"
#include "imcf/geometry.hpp"
#include "imcf/random.hpp"

namespace imcf {
namespace {

// Smooth random field on the unit sphere/circle with |g| <= 1: a convex
// combination of plane waves cos(f <d, theta> + phase), f in {2..5}.
class WaveField {
 public:
  WaveField(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(split_seed(seed, SeedStream::Shape));
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> freq(2, 5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double total = 0.0;
    for (int k = 0; k < kModes; ++k) {
      Eigen::Vector3d d(gauss(rng), gauss(rng), dim == 2 ? gauss(rng) : 0.0);
      dirs_[k] = d.normalized();
      freqs_[k] = freq(rng);
      phases_[k] = 2.0 * std::numbers::pi * unit(rng);
      coeffs_[k] = 0.5 + 0.5 * unit(rng);
      total += coeffs_[k];
    }
    for (double& c : coeffs_) c /= total;
  }

  double operator()(const Eigen::Vector3d& theta) const {
    double g = 0.0;
    for (int k = 0; k < kModes; ++k) g += coeffs_[k] * std::cos(freqs_[k] * dirs_[k].dot(theta) + phases_[k]);
    return g;
  }

 private:
  static constexpr int kModes = 8;
  std::array<Eigen::Vector3d, kModes> dirs_;
  std::array<double, kModes> freqs_{};
  std::array<double, kModes> phases_{};
  std::array<double, kModes> coeffs_{};
};

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw Error(ErrorKind::InvalidArgument, std::string(name) + " must be positive, got " + std::to_string(value));
}

}  // namespace

std::string describe(const RadialProfile& profile) {
  std::ostringstream out;
  out.precision(12);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SphereProfile>) {
          out << "sphere(" << p.radius << ")";
        } else if constexpr (std::is_same_v<T, EllipsoidProfile>) {
          out << "ellipsoid(" << p.a << "," << p.b << "," << p.c << ")";
        } else {
          out << "perturbed_sphere(" << p.radius << "," << p.amplitude << "," << p.seed << ")";
        }
      },
      profile);
  return out.str();
}

double unit_sphere_area(int n) {
  if (n == 1) return 2.0 * std::numbers::pi;
  if (n == 2) return 4.0 * std::numbers::pi;
  throw Error(ErrorKind::InvalidArgument, "dimension must be 1 or 2");
}

StarSurface make_surface(const AtlasPtr& atlas, Eigen::VectorXd radii, double time) {
  if (!atlas) throw Error(ErrorKind::InvalidArgument, "missing atlas");
  if (static_cast<std::size_t>(radii.size()) != atlas->size())
    throw Error(ErrorKind::InvalidArgument, "radius count does not match atlas size");
  for (Eigen::Index i = 0; i < radii.size(); ++i) {
    if (!std::isfinite(radii[i]))
      throw Error(ErrorKind::NumericalBlowup, "nonfinite radius at vertex " + std::to_string(i));
    if (radii[i] <= 0.0)
      throw Error(ErrorKind::StarShapeLoss, "radius " + std::to_string(radii[i]) + " at vertex " + std::to_string(i));
  }
  return StarSurface{atlas, std::move(radii), time};
}

StarSurface embed(const AtlasPtr& atlas, const RadialProfile& profile) {
  if (!atlas) throw Error(ErrorKind::InvalidArgument, "missing atlas");
  const auto n = static_cast<Eigen::Index>(atlas->size());
  const int dim = atlas->dimension();
  Eigen::VectorXd radii(n);

  if (const auto* s = std::get_if<SphereProfile>(&profile)) {
    require_positive(s->radius, "sphere radius");
    radii.setConstant(s->radius);
  } else if (const auto* e = std::get_if<EllipsoidProfile>(&profile)) {
    require_positive(e->a, "ellipsoid axis a");
    require_positive(e->b, "ellipsoid axis b");
    if (dim == 2) require_positive(e->c, "ellipsoid axis c");
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector3d& t = atlas->direction(static_cast<std::size_t>(i));
      double q = t.x() * t.x() / (e->a * e->a) + t.y() * t.y() / (e->b * e->b);
      if (dim == 2) q += t.z() * t.z() / (e->c * e->c);
      radii[i] = 1.0 / std::sqrt(q);
    }
  } else {
    const auto& p = std::get<PerturbedSphereProfile>(profile);
    require_positive(p.radius, "sphere radius");
    if (p.amplitude < 0.0 || !std::isfinite(p.amplitude))
      throw Error(ErrorKind::InvalidArgument, "perturbation amplitude must be nonnegative");
    if (p.amplitude >= p.radius)
      throw Error(ErrorKind::DegenerateShape, "perturbation amplitude " + std::to_string(p.amplitude) +
                                                  " reaches radius " + std::to_string(p.radius));
    const WaveField field(dim, p.seed);
    for (Eigen::Index i = 0; i < n; ++i)
      radii[i] = p.radius + p.amplitude * field(atlas->direction(static_cast<std::size_t>(i)));
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(radii[i] > 0.0)) throw Error(ErrorKind::DegenerateShape, "radius not positive at vertex " + std::to_string(i));
  return StarSurface{atlas, std::move(radii), 0.0};
}

}  // namespace imcf
