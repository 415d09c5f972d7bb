#pragma once

#include "geolab/manifold.hpp"

#include <Eigen/Dense>

#include <string>

namespace geolab {

enum class IsometryKind { Identity, Translation, Rotation, Product };

/// An isometry of a catalog manifold: torus translation, rotation of an
/// embedded sphere or ellipsoid, or (on S^1 x S^2) a circle shift combined
/// with a sphere rotation.
class Isometry {
 public:
  static Isometry identity();
  static Isometry translation(const Eigen::Vector2d& shift);
  static Isometry rotation(const Eigen::Vector3d& axis, double angle);
  static Isometry product(double circle_shift, const Eigen::Vector3d& axis, double angle);

  IsometryKind kind() const { return kind_; }
  bool is_identity() const { return kind_ == IsometryKind::Identity; }
  /// Flat parameter vector: translation (2), rotation (axis 3 + angle), product (shift + axis + angle).
  Eigen::VectorXd parameters() const;
  std::string describe() const;

  Point apply(const Manifold& m, const Point& x) const;
  /// dI_x applied to an ambient tangent vector at x.
  Vec differential(const Manifold& m, const Point& x, const Vec& v) const;
  Tangent differential(const Manifold& m, const Tangent& v) const;
  Frame differential(const Manifold& m, const Point& x, const Frame& basis) const;
  Isometry inverse() const;
  /// (*this) o other
  Isometry compose(const Isometry& other) const;
  /// Orthonormal basis of T_x fix(I); x must be a fixed point.
  Frame fixed_tangent_basis(const Manifold& m, const Point& x) const;

 private:
  IsometryKind kind_ = IsometryKind::Identity;
  Eigen::Vector2d shift_ = Eigen::Vector2d::Zero();
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d axis_ = Eigen::Vector3d::UnitZ();
  double angle_ = 0.0;
};

struct IsometryCheck {
  double max_metric_defect = 0.0;  // |g(dI u, dI w) - g(u, w)|
  double max_inverse_defect = 0.0;  // dist(I^-1 I x, x)
  double max_distance_defect = 0.0;  // |dist(Ix, Iy) - dist(x, y)|
};

/// Random-sample check that I preserves the metric on M.
IsometryCheck verify_isometry(const Manifold& m, const Isometry& iso, int samples, Rng& rng);

}  // namespace geolab
