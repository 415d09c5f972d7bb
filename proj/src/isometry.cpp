#include "geolab/isometry.hpp"

#include "geolab/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <sstream>

namespace geolab {

namespace {

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  if (axis.norm() == 0.0) throw Error(ErrorCode::ConfigError, "rotation axis must be nonzero");
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace

Isometry Isometry::identity() { return Isometry{}; }

Isometry Isometry::translation(const Eigen::Vector2d& shift) {
  Isometry iso;
  iso.kind_ = IsometryKind::Translation;
  iso.shift_ = shift;
  return iso;
}

Isometry Isometry::rotation(const Eigen::Vector3d& axis, double angle) {
  Isometry iso;
  iso.kind_ = IsometryKind::Rotation;
  iso.axis_ = axis.normalized();
  iso.angle_ = angle;
  iso.rotation_ = axis_angle(axis, angle);
  return iso;
}

Isometry Isometry::product(double circle_shift, const Eigen::Vector3d& axis, double angle) {
  Isometry iso;
  iso.kind_ = IsometryKind::Product;
  iso.shift_ = Eigen::Vector2d(circle_shift, 0.0);
  iso.axis_ = axis.normalized();
  iso.angle_ = angle;
  iso.rotation_ = axis_angle(axis, angle);
  return iso;
}

Eigen::VectorXd Isometry::parameters() const {
  switch (kind_) {
    case IsometryKind::Identity: return Eigen::VectorXd();
    case IsometryKind::Translation: return shift_;
    case IsometryKind::Rotation: {
      Eigen::VectorXd p(4);
      p << axis_, angle_;
      return p;
    }
    case IsometryKind::Product: {
      Eigen::VectorXd p(5);
      p << shift_[0], axis_, angle_;
      return p;
    }
  }
  return {};
}

std::string Isometry::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case IsometryKind::Identity: os << "identity"; break;
    case IsometryKind::Translation: os << "translation(" << shift_[0] << "," << shift_[1] << ")"; break;
    case IsometryKind::Rotation:
      os << "rotation(axis=" << axis_[0] << "," << axis_[1] << "," << axis_[2] << ";angle=" << angle_ << ")";
      break;
    case IsometryKind::Product:
      os << "product(shift=" << shift_[0] << ";axis=" << axis_[0] << "," << axis_[1] << "," << axis_[2]
         << ";angle=" << angle_ << ")";
      break;
  }
  return os.str();
}

Point Isometry::apply(const Manifold& m, const Point& x) const {
  switch (kind_) {
    case IsometryKind::Identity: return x;
    case IsometryKind::Translation: {
      if (m.kind() != ModelKind::FlatTorus) throw Error(ErrorCode::ConfigError, "translations act on the flat torus only");
      Vec z = x.coords;
      z[0] += shift_[0];
      z[1] += shift_[1];
      return m.make_point(z);
    }
    case IsometryKind::Rotation: {
      if (m.ambient_dimension() != 3) throw Error(ErrorCode::ConfigError, "rotations act on embedded surfaces only");
      Point p = x;
      p.coords = rotation_ * x.coords.head<3>();
      return p;
    }
    case IsometryKind::Product: {
      if (m.kind() != ModelKind::CircleTimesSphere) throw Error(ErrorCode::ConfigError, "product isometry needs S1xS2");
      Vec z = x.coords;
      z[0] += shift_[0];
      z.segment<3>(1) = rotation_ * x.coords.segment<3>(1);
      return m.make_point(z);
    }
  }
  return x;
}

Vec Isometry::differential(const Manifold&, const Point&, const Vec& v) const {
  switch (kind_) {
    case IsometryKind::Identity:
    case IsometryKind::Translation: return v;
    case IsometryKind::Rotation: return Vec(rotation_ * v.head<3>());
    case IsometryKind::Product: {
      Vec out = v;
      out.segment<3>(1) = rotation_ * v.segment<3>(1);
      return out;
    }
  }
  return v;
}

Tangent Isometry::differential(const Manifold& m, const Tangent& v) const {
  return Tangent{apply(m, v.base), differential(m, v.base, v.components)};
}

Frame Isometry::differential(const Manifold&, const Point&, const Frame& basis) const {
  switch (kind_) {
    case IsometryKind::Identity:
    case IsometryKind::Translation: return basis;
    case IsometryKind::Rotation: return Frame(rotation_ * basis);
    case IsometryKind::Product: {
      Frame out = basis;
      out.bottomRows(3) = rotation_ * basis.bottomRows(3);
      return out;
    }
  }
  return basis;
}

Isometry Isometry::inverse() const {
  switch (kind_) {
    case IsometryKind::Identity: return *this;
    case IsometryKind::Translation: return translation(-shift_);
    case IsometryKind::Rotation: return rotation(axis_, -angle_);
    case IsometryKind::Product: return product(-shift_[0], axis_, -angle_);
  }
  return *this;
}

Isometry Isometry::compose(const Isometry& other) const {
  if (is_identity()) return other;
  if (other.is_identity()) return *this;
  if (kind_ != other.kind_) throw Error(ErrorCode::ConfigError, "cannot compose isometries of different kinds");
  Isometry out = *this;
  out.shift_ = shift_ + other.shift_;
  out.rotation_ = rotation_ * other.rotation_;
  const Eigen::AngleAxisd aa(out.rotation_);
  out.axis_ = aa.axis();
  out.angle_ = aa.angle();
  return out;
}

Frame Isometry::fixed_tangent_basis(const Manifold& m, const Point& x) const {
  const Frame basis = m.tangent_basis(x);
  if (is_identity()) return basis;
  // T_x fix(I) = ker(dI_x - id) restricted to T_x M.
  const Eigen::MatrixXd a = basis.transpose() * differential(m, x, basis) - Eigen::MatrixXd::Identity(basis.cols(), basis.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  std::vector<int> null_cols;
  for (int i = 0; i < basis.cols(); ++i) {
    const double s = i < sv.size() ? sv[i] : 0.0;
    if (s < 1e-9) null_cols.push_back(i);
  }
  Frame out(basis.rows(), static_cast<int>(null_cols.size()));
  for (std::size_t c = 0; c < null_cols.size(); ++c) {
    out.col(static_cast<int>(c)) = basis * svd.matrixV().col(null_cols[c]);
  }
  return out;
}

IsometryCheck verify_isometry(const Manifold& m, const Isometry& iso, int samples, Rng& rng) {
  IsometryCheck out;
  const Isometry inv = iso.inverse();
  for (int s = 0; s < samples; ++s) {
    const Point x = m.random_point(rng);
    const Vec u = m.random_tangent(x, 1.0, rng);
    const Vec w = m.random_tangent(x, 1.0, rng);
    const Point ix = iso.apply(m, x);
    const Vec du = iso.differential(m, x, u);
    const Vec dw = iso.differential(m, x, w);
    out.max_metric_defect = std::max(out.max_metric_defect, std::abs(m.inner(ix, du, dw) - m.inner(x, u, w)));
    // The image of a tangent vector must be tangent at I(x).
    out.max_metric_defect = std::max(out.max_metric_defect, (m.project_tangent(ix, du) - du).norm());
    out.max_inverse_defect = std::max(out.max_inverse_defect, m.dist(inv.apply(m, ix), x));
    const Point y = m.retract(x, m.random_tangent(x, 0.3 * m.injrad(), rng));
    out.max_distance_defect =
        std::max(out.max_distance_defect, std::abs(m.dist(ix, iso.apply(m, y)) - m.dist(x, y)));
  }
  return out;
}

}  // namespace geolab
