#pragma once

#include <Eigen/Dense>

#include <random>
#include <string>
#include <variant>

namespace geolab {

/// Chart coordinates. The catalog never needs more than four ambient
/// coordinates (S^1 x S^2 uses one arclength coordinate plus R^3).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;
/// Ambient-by-intrinsic matrix whose columns span a tangent space.
using Frame = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;

using Rng = std::mt19937_64;

enum class ChartId { SphereEmbedded, TorusFundamental, EllipsoidEmbedded, CircleSphere };

struct Point {
  ChartId chart = ChartId::SphereEmbedded;
  Vec coords;
};

/// Tangent vector expressed in the ambient frame of its base point's chart.
struct Tangent {
  Point base;
  Vec components;
};

enum class ModelKind { RoundSphere, FlatTorus, TriaxialEllipsoid, CircleTimesSphere };

std::string to_string(ModelKind kind);

struct SphereModel {
  double radius = 1.0;
};

/// R^2 / Lambda, lattice basis in the columns.
struct TorusModel {
  Eigen::Matrix2d lattice = Eigen::Matrix2d::Identity();
};

struct EllipsoidModel {
  Eigen::Vector3d axes{1.0, 1.0, 1.0};
};

/// S^1(length) x S^2(radius); coordinate 0 is arclength on the circle.
struct ProductModel {
  double circle_length = 1.0;
  double sphere_radius = 1.0;
};

/// Closed Riemannian manifold from a fixed catalog. Values are immutable and
/// every member function is pure, so a Manifold can be shared across threads.
class Manifold {
 public:
  static Manifold round_sphere(double radius = 1.0);
  static Manifold flat_torus(const Eigen::Matrix2d& lattice = Eigen::Matrix2d::Identity());
  static Manifold ellipsoid(double a, double b, double c);
  static Manifold circle_times_sphere(double circle_length, double sphere_radius);

  ModelKind kind() const { return kind_; }
  int dimension() const { return kind_ == ModelKind::CircleTimesSphere ? 3 : 2; }
  int ambient_dimension() const;
  /// Declared lower bound for the injectivity radius.
  double injrad() const { return injrad_; }
  /// Radius below which metric balls are geodesically convex; at most injrad/3.
  double convexity_radius() const { return injrad_ / 3.0; }
  const auto& model() const { return model_; }
  std::string describe() const;

  double dist(const Point& x, const Point& y) const;
  /// Initial velocity of the unique shortest geodesic from x to y on [0,1].
  Tangent log(const Point& x, const Point& y) const;
  Point exp(const Tangent& v, double t = 1.0) const;
  /// Point at parameter s on the shortest geodesic from x (s=0) to y (s=1).
  Point geodesic_between(const Point& x, const Point& y, double s) const;

  double inner(const Point& x, const Vec& u, const Vec& w) const;
  double norm(const Point& x, const Vec& u) const { return std::sqrt(inner(x, u, u)); }
  Vec project_tangent(const Point& x, const Vec& v) const;
  /// Orthonormal basis of T_x M as columns in the ambient frame.
  Frame tangent_basis(const Point& x) const;

  /// First-order retraction; equivariant under the catalog isometries.
  Point retract(const Point& x, const Vec& v) const;
  /// d/dc retract(x, v + basis c) at c = 0, as an ambient-by-cols matrix.
  Frame retract_differential(const Point& x, const Vec& v, const Frame& basis) const;

  /// Maps raw coordinates onto the manifold (normalisation / lattice reduction).
  Point make_point(const Vec& coords) const;
  bool contains(const Point& x, double tol = 1e-9) const;

  Point random_point(Rng& rng) const;
  Vec random_tangent(const Point& x, double length, Rng& rng) const;

  /// Gaussian curvature; only defined on the two-dimensional models.
  double gaussian_curvature(const Point& x) const;

 private:
  Manifold() = default;

  ModelKind kind_ = ModelKind::RoundSphere;
  std::variant<SphereModel, TorusModel, EllipsoidModel, ProductModel> model_;
  double injrad_ = 0.0;
};

/// Geodesic shooting on the triaxial ellipsoid (exposed for tests).
namespace ellipsoid_detail {
Eigen::Vector3d exp(const Eigen::Vector3d& axes, const Eigen::Vector3d& x, const Eigen::Vector3d& v);
}

}  // namespace geolab
