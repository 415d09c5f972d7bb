#include "geolab/manifold.hpp"

#include "geolab/error.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace geolab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PreViolation: return "PRE_VIOLATION";
    case ErrorCode::OdeDivergence: return "ODE_DIVERGENCE";
    case ErrorCode::GridMismatch: return "GRID_MISMATCH";
    case ErrorCode::RadiusTooLarge: return "RADIUS_TOO_LARGE";
    case ErrorCode::InconsistentPeriods: return "INCONSISTENT_PERIODS";
    case ErrorCode::NotMultiple: return "NOT_MULTIPLE";
    case ErrorCode::SegmentTooLong: return "SEGMENT_TOO_LONG";
    case ErrorCode::NewtonStall: return "NEWTON_STALL";
    case ErrorCode::NonIsolatedSuspected: return "NONISOLATED_SUSPECTED";
    case ErrorCode::NotCritical: return "NOT_CRITICAL";
    case ErrorCode::VerticesTooFar: return "VERTICES_TOO_FAR";
    case ErrorCode::PeriodMismatch: return "PERIOD_MISMATCH";
    case ErrorCode::IndexTooSmall: return "INDEX_TOO_SMALL";
    case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::MaxItersExceeded: return "MAX_ITERS_EXCEEDED";
    case ErrorCode::ConfigError: return "CONFIG_ERROR";
  }
  return "UNKNOWN";
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::RoundSphere: return "sphere";
    case ModelKind::FlatTorus: return "torus";
    case ModelKind::TriaxialEllipsoid: return "ellipsoid";
    case ModelKind::CircleTimesSphere: return "circle_sphere";
  }
  return "unknown";
}

namespace {

using Eigen::Vector3d;

constexpr double kPi = std::numbers::pi;

Vector3d head3(const Vec& v, int offset = 0) { return v.segment<3>(offset); }

Vec from3(const Vector3d& v) {
  Vec out(3);
  out = v;
  return out;
}

// Orthonormal pair spanning the plane orthogonal to n (unit).
Eigen::Matrix<double, 3, 2> plane_basis(const Vector3d& n) {
  Vector3d helper = Vector3d::UnitX();
  Eigen::Index best = 0;
  n.cwiseAbs().minCoeff(&best);
  helper = Vector3d::Unit(best);
  Vector3d e1 = (helper - helper.dot(n) * n).normalized();
  Vector3d e2 = n.cross(e1);
  Eigen::Matrix<double, 3, 2> out;
  out.col(0) = e1;
  out.col(1) = e2;
  return out;
}

// ---------------------------------------------------------------- sphere

double sphere_angle(const Vector3d& x, const Vector3d& y) {
  return std::atan2(x.cross(y).norm(), x.dot(y));
}

Vector3d sphere_log(double r, const Vector3d& x, const Vector3d& y) {
  const double angle = sphere_angle(x, y);
  if (angle < 1e-300) return Vector3d::Zero();
  Vector3d w = y - (x.dot(y) / (r * r)) * x;
  const double wn = w.norm();
  if (wn < 1e-300) return Vector3d::Zero();
  return (r * angle / wn) * w;
}

Vector3d sphere_exp(double r, const Vector3d& x, const Vector3d& v) {
  const double len = v.norm();
  if (len == 0.0) return x;
  const double theta = len / r;
  Vector3d out = std::cos(theta) * x + (r * std::sin(theta) / len) * v;
  return out * (r / out.norm());
}

Vector3d sphere_retract(double r, const Vector3d& x, const Vector3d& v) {
  Vector3d z = x + v;
  return z * (r / z.norm());
}

Eigen::Matrix3d sphere_retract_jac(double r, const Vector3d& x, const Vector3d& v) {
  Vector3d z = x + v;
  const double n = z.norm();
  Vector3d u = z / n;
  return (r / n) * (Eigen::Matrix3d::Identity() - u * u.transpose());
}

// ----------------------------------------------------------------- torus

Eigen::Vector2d torus_reduce(const Eigen::Matrix2d& lattice, const Eigen::Vector2d& x) {
  Eigen::Vector2d u = lattice.partialPivLu().solve(x);
  for (int i = 0; i < 2; ++i) {
    u[i] -= std::floor(u[i]);
    if (u[i] >= 1.0) u[i] = 0.0;
  }
  return lattice * u;
}

// Minimum over lattice representatives with |shift components| <= 2.
Eigen::Vector2d torus_min_displacement(const Eigen::Matrix2d& lattice, const Eigen::Vector2d& d) {
  Eigen::Vector2d best = d;
  double best_norm = d.squaredNorm();
  for (int i = -2; i <= 2; ++i) {
    for (int j = -2; j <= 2; ++j) {
      Eigen::Vector2d cand = d + lattice * Eigen::Vector2d(i, j);
      const double n = cand.squaredNorm();
      if (n < best_norm) {
        best_norm = n;
        best = cand;
      }
    }
  }
  return best;
}

// --------------------------------------------------------------- ellipsoid

using State = std::array<double, 6>;

struct GeodesicRhs {
  Vector3d inv_sq;  // 1/a^2, 1/b^2, 1/c^2
  void operator()(const State& s, State& ds, double /*t*/) const {
    const Vector3d x(s[0], s[1], s[2]);
    const Vector3d v(s[3], s[4], s[5]);
    const Vector3d ax = inv_sq.cwiseProduct(x);
    const double lambda = v.dot(inv_sq.cwiseProduct(v)) / ax.squaredNorm();
    const Vector3d acc = -lambda * ax;
    ds = {v[0], v[1], v[2], acc[0], acc[1], acc[2]};
  }
};

Vector3d ellipsoid_reduce(const Vector3d& axes, const Vector3d& z) {
  const double f = z.cwiseQuotient(axes).squaredNorm();
  return z / std::sqrt(f);
}

Vector3d ellipsoid_normal(const Vector3d& axes, const Vector3d& x) {
  return x.cwiseQuotient(axes.cwiseProduct(axes)).normalized();
}

Vector3d ellipsoid_project(const Vector3d& axes, const Vector3d& x, const Vector3d& v) {
  const Vector3d n = ellipsoid_normal(axes, x);
  return v - v.dot(n) * n;
}

constexpr double kOdeTol = 1e-13;

Vector3d ellipsoid_exp_impl(const Vector3d& axes, const Vector3d& x, const Vector3d& v) {
  namespace odeint = boost::numeric::odeint;
  if (v.norm() == 0.0) return x;
  GeodesicRhs rhs{axes.cwiseProduct(axes).cwiseInverse()};
  State s{x[0], x[1], x[2], v[0], v[1], v[2]};
  auto stepper = odeint::make_controlled(kOdeTol, kOdeTol, odeint::runge_kutta_fehlberg78<State>());
  const double dt0 = std::min(0.25, 0.1 / v.norm());
  const std::size_t steps = odeint::integrate_adaptive(stepper, rhs, s, 0.0, 1.0, dt0);
  Vector3d out(s[0], s[1], s[2]);
  if (!out.allFinite() || steps > 200000) {
    throw Error(ErrorCode::OdeDivergence, "ellipsoid geodesic integration failed");
  }
  return ellipsoid_reduce(axes, out);
}

// Newton shooting for the initial velocity from x to y, chord initialised.
// Returns false when the iteration does not converge.
bool ellipsoid_shoot(const Vector3d& axes, const Vector3d& x, const Vector3d& y, Vector3d& v_out) {
  const auto bx = plane_basis(ellipsoid_normal(axes, x));
  const auto by = plane_basis(ellipsoid_normal(axes, y));
  Eigen::Vector2d a = bx.transpose() * (y - x);
  if (a.norm() == 0.0) {
    v_out.setZero();
    return true;
  }
  // Chord length underestimates arclength; the projected chord is a good start.
  a *= (y - x).norm() / a.norm();
  auto residual = [&](const Eigen::Vector2d& coeffs) {
    return Eigen::Vector2d(by.transpose() * (ellipsoid_exp_impl(axes, x, bx * coeffs) - y));
  };
  Eigen::Vector2d r = residual(a);
  for (int iter = 0; iter < 50; ++iter) {
    if (r.norm() < 1e-15 * std::max(1.0, a.norm())) break;
    const double h = 1e-7 * std::max(1e-3, a.norm());
    Eigen::Matrix2d jac;
    for (int c = 0; c < 2; ++c) {
      Eigen::Vector2d ap = a, am = a;
      ap[c] += h;
      am[c] -= h;
      jac.col(c) = (residual(ap) - residual(am)) / (2.0 * h);
    }
    Eigen::Vector2d step = jac.partialPivLu().solve(-r);
    double t = 1.0;
    Eigen::Vector2d trial = a + step;
    Eigen::Vector2d rt = residual(trial);
    while (rt.norm() > r.norm() && t > 1e-4) {
      t *= 0.5;
      trial = a + t * step;
      rt = residual(trial);
    }
    if (rt.norm() >= r.norm() && r.norm() < 1e-12) break;
    a = trial;
    r = rt;
  }
  const Vector3d landed = ellipsoid_exp_impl(axes, x, bx * a);
  if ((landed - y).norm() > 1e-11 * std::max(1.0, a.norm())) return false;
  v_out = bx * a;
  return true;
}

// Length of a relaxed broken geodesic from x to y; used only beyond the
// injectivity radius where shooting is not guaranteed to find the minimiser.
double ellipsoid_long_dist(const Vector3d& axes, const Vector3d& x, const Vector3d& y) {
  constexpr int n = 24;
  std::vector<Vector3d> path(n + 1);
  Vector3d offset = Vector3d::Zero();
  if ((x + y).norm() < 1e-6) offset = plane_basis(ellipsoid_normal(axes, x)).col(0) * 1e-3;
  for (int i = 0; i <= n; ++i) {
    const double s = static_cast<double>(i) / n;
    Vector3d z = (1.0 - s) * x + s * y + std::sin(kPi * s) * offset;
    if (z.norm() < 1e-9) z = plane_basis(ellipsoid_normal(axes, x)).col(0);
    path[i] = ellipsoid_reduce(axes, z);
  }
  for (int sweep = 0; sweep < 400; ++sweep) {
    double moved = 0.0;
    for (int i = 1; i < n; ++i) {
      Vector3d vl, vr;
      if (!ellipsoid_shoot(axes, path[i], path[i - 1], vl) || !ellipsoid_shoot(axes, path[i], path[i + 1], vr)) {
        throw Error(ErrorCode::OdeDivergence, "long-range distance relaxation failed");
      }
      const Vector3d step = 0.5 * (vl + vr);
      moved = std::max(moved, step.norm());
      path[i] = ellipsoid_exp_impl(axes, path[i], step);
    }
    if (moved < 1e-13) break;
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Vector3d v;
    if (!ellipsoid_shoot(axes, path[i], path[i + 1], v)) {
      throw Error(ErrorCode::OdeDivergence, "long-range distance relaxation failed");
    }
    total += v.norm();
  }
  return total;
}

// ----------------------------------------------------------------- product

double circle_diff(double length, double from, double to) {
  double d = std::fmod(to - from, length);
  if (d > 0.5 * length) d -= length;
  if (d < -0.5 * length) d += length;
  return d;
}

double circle_reduce(double length, double s) {
  double out = std::fmod(s, length);
  if (out < 0.0) out += length;
  if (out >= length) out = 0.0;
  return out;
}

}  // namespace

namespace ellipsoid_detail {
Vector3d exp(const Vector3d& axes, const Vector3d& x, const Vector3d& v) {
  return ellipsoid_exp_impl(axes, x, v);
}
}  // namespace ellipsoid_detail

// ------------------------------------------------------------ construction

Manifold Manifold::round_sphere(double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::ConfigError, "sphere radius must be positive");
  Manifold m;
  m.kind_ = ModelKind::RoundSphere;
  m.model_ = SphereModel{radius};
  m.injrad_ = kPi * radius;
  return m;
}

Manifold Manifold::flat_torus(const Eigen::Matrix2d& lattice) {
  if (std::abs(lattice.determinant()) < 1e-12) {
    throw Error(ErrorCode::ConfigError, "torus lattice is degenerate");
  }
  Manifold m;
  m.kind_ = ModelKind::FlatTorus;
  m.model_ = TorusModel{lattice};
  double shortest = std::numeric_limits<double>::infinity();
  for (int i = -3; i <= 3; ++i) {
    for (int j = -3; j <= 3; ++j) {
      if (i == 0 && j == 0) continue;
      shortest = std::min(shortest, (lattice * Eigen::Vector2d(i, j)).norm());
    }
  }
  m.injrad_ = 0.5 * shortest;
  return m;
}

Manifold Manifold::ellipsoid(double a, double b, double c) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw Error(ErrorCode::ConfigError, "ellipsoid axes must be positive");
  Manifold m;
  m.kind_ = ModelKind::TriaxialEllipsoid;
  m.model_ = EllipsoidModel{Vector3d(a, b, c)};
  // Klingenberg: injrad >= pi / sqrt(K_max); K peaks at the end of the longest axis.
  const std::array<double, 3> ax{a, b, c};
  double kmax = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double o1 = ax[(i + 1) % 3], o2 = ax[(i + 2) % 3];
    kmax = std::max(kmax, ax[i] * ax[i] / (o1 * o1 * o2 * o2));
  }
  m.injrad_ = kPi / std::sqrt(kmax);
  return m;
}

Manifold Manifold::circle_times_sphere(double circle_length, double sphere_radius) {
  if (!(circle_length > 0.0 && sphere_radius > 0.0)) {
    throw Error(ErrorCode::ConfigError, "product factors must have positive size");
  }
  Manifold m;
  m.kind_ = ModelKind::CircleTimesSphere;
  m.model_ = ProductModel{circle_length, sphere_radius};
  m.injrad_ = std::min(0.5 * circle_length, kPi * sphere_radius);
  return m;
}

int Manifold::ambient_dimension() const {
  switch (kind_) {
    case ModelKind::FlatTorus: return 2;
    case ModelKind::CircleTimesSphere: return 4;
    default: return 3;
  }
}

std::string Manifold::describe() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SphereModel>) {
          os << "sphere(r=" << m.radius << ")";
        } else if constexpr (std::is_same_v<T, TorusModel>) {
          os << "torus(lattice=[" << m.lattice(0, 0) << "," << m.lattice(1, 0) << ";" << m.lattice(0, 1) << ","
             << m.lattice(1, 1) << "])";
        } else if constexpr (std::is_same_v<T, EllipsoidModel>) {
          os << "ellipsoid(" << m.axes[0] << "," << m.axes[1] << "," << m.axes[2] << ")";
        } else {
          os << "circle_sphere(l=" << m.circle_length << ",r=" << m.sphere_radius << ")";
        }
      },
      model_);
  return os.str();
}

// ------------------------------------------------------------- operations

Point Manifold::make_point(const Vec& coords) const {
  Point p;
  switch (kind_) {
    case ModelKind::RoundSphere: {
      const double r = std::get<SphereModel>(model_).radius;
      p.chart = ChartId::SphereEmbedded;
      p.coords = from3(head3(coords) * (r / head3(coords).norm()));
      break;
    }
    case ModelKind::FlatTorus: {
      const auto& lat = std::get<TorusModel>(model_).lattice;
      p.chart = ChartId::TorusFundamental;
      Vec out(2);
      out = torus_reduce(lat, Eigen::Vector2d(coords[0], coords[1]));
      p.coords = out;
      break;
    }
    case ModelKind::TriaxialEllipsoid: {
      const auto& axes = std::get<EllipsoidModel>(model_).axes;
      p.chart = ChartId::EllipsoidEmbedded;
      p.coords = from3(ellipsoid_reduce(axes, head3(coords)));
      break;
    }
    case ModelKind::CircleTimesSphere: {
      const auto& pm = std::get<ProductModel>(model_);
      p.chart = ChartId::CircleSphere;
      Vec out(4);
      out[0] = circle_reduce(pm.circle_length, coords[0]);
      Vector3d s = head3(coords, 1);
      out.segment<3>(1) = s * (pm.sphere_radius / s.norm());
      p.coords = out;
      break;
    }
  }
  return p;
}

bool Manifold::contains(const Point& x, double tol) const {
  if (x.coords.size() != ambient_dimension()) return false;
  switch (kind_) {
    case ModelKind::RoundSphere:
      return std::abs(x.coords.norm() - std::get<SphereModel>(model_).radius) < tol;
    case ModelKind::FlatTorus: {
      Eigen::Vector2d u = std::get<TorusModel>(model_).lattice.partialPivLu().solve(Eigen::Vector2d(x.coords[0], x.coords[1]));
      return u.minCoeff() >= -tol && u.maxCoeff() < 1.0 + tol;
    }
    case ModelKind::TriaxialEllipsoid: {
      const auto& axes = std::get<EllipsoidModel>(model_).axes;
      return std::abs(head3(x.coords).cwiseQuotient(axes).squaredNorm() - 1.0) < tol;
    }
    case ModelKind::CircleTimesSphere: {
      const auto& pm = std::get<ProductModel>(model_);
      return x.coords[0] >= -tol && x.coords[0] < pm.circle_length + tol &&
             std::abs(head3(x.coords, 1).norm() - pm.sphere_radius) < tol;
    }
  }
  return false;
}

double Manifold::dist(const Point& x, const Point& y) const {
  switch (kind_) {
    case ModelKind::RoundSphere:
      return std::get<SphereModel>(model_).radius * sphere_angle(head3(x.coords), head3(y.coords));
    case ModelKind::FlatTorus: {
      const Eigen::Vector2d d(y.coords[0] - x.coords[0], y.coords[1] - x.coords[1]);
      return torus_min_displacement(std::get<TorusModel>(model_).lattice, d).norm();
    }
    case ModelKind::TriaxialEllipsoid: {
      const auto& axes = std::get<EllipsoidModel>(model_).axes;
      const Vector3d a = head3(x.coords), b = head3(y.coords);
      if ((a - b).norm() == 0.0) return 0.0;
      Vector3d v;
      if ((a - b).norm() < 0.8 * injrad_ && ellipsoid_shoot(axes, a, b, v) && v.norm() < injrad_) return v.norm();
      return ellipsoid_long_dist(axes, a, b);
    }
    case ModelKind::CircleTimesSphere: {
      const auto& pm = std::get<ProductModel>(model_);
      const double dc = circle_diff(pm.circle_length, x.coords[0], y.coords[0]);
      const double ds = pm.sphere_radius * sphere_angle(head3(x.coords, 1), head3(y.coords, 1));
      return std::hypot(dc, ds);
    }
  }
  return 0.0;
}

Tangent Manifold::log(const Point& x, const Point& y) const {
  Tangent out{x, Vec::Zero(ambient_dimension())};
  switch (kind_) {
    case ModelKind::RoundSphere: {
      const double r = std::get<SphereModel>(model_).radius;
      if (r * sphere_angle(head3(x.coords), head3(y.coords)) >= injrad_ * (1.0 - 1e-12)) {
        throw Error(ErrorCode::PreViolation, "log on sphere requires dist < injrad");
      }
      out.components = from3(sphere_log(r, head3(x.coords), head3(y.coords)));
      break;
    }
    case ModelKind::FlatTorus: {
      const Eigen::Vector2d d(y.coords[0] - x.coords[0], y.coords[1] - x.coords[1]);
      const Eigen::Vector2d v = torus_min_displacement(std::get<TorusModel>(model_).lattice, d);
      if (v.norm() >= injrad_) throw Error(ErrorCode::PreViolation, "log on torus requires dist < injrad");
      out.components = v;
      break;
    }
    case ModelKind::TriaxialEllipsoid: {
      const auto& axes = std::get<EllipsoidModel>(model_).axes;
      const Vector3d a = head3(x.coords), b = head3(y.coords);
      Vector3d v = Vector3d::Zero();
      if ((a - b).norm() > 0.0) {
        if ((a - b).norm() >= injrad_ || !ellipsoid_shoot(axes, a, b, v) || v.norm() >= injrad_) {
          throw Error(ErrorCode::PreViolation, "log on ellipsoid requires dist < injrad");
        }
      }
      out.components = from3(v);
      break;
    }
    case ModelKind::CircleTimesSphere: {
      const auto& pm = std::get<ProductModel>(model_);
      const double dc = circle_diff(pm.circle_length, x.coords[0], y.coords[0]);
      const Vector3d vs = sphere_log(pm.sphere_radius, head3(x.coords, 1), head3(y.coords, 1));
      if (std::hypot(dc, vs.norm()) >= injrad_ ||
          pm.sphere_radius * sphere_angle(head3(x.coords, 1), head3(y.coords, 1)) >= kPi * pm.sphere_radius * (1 - 1e-12)) {
        throw Error(ErrorCode::PreViolation, "log on S1xS2 requires dist < injrad");
      }
      out.components[0] = dc;
      out.components.segment<3>(1) = vs;
      break;
    }
  }
  return out;
}

Point Manifold::exp(const Tangent& v, double t) const {
  const Point& x = v.base;
  Point p = x;
  switch (kind_) {
    case ModelKind::RoundSphere:
      p.coords = from3(sphere_exp(std::get<SphereModel>(model_).radius, head3(x.coords), t * head3(v.components)));
      break;
    case ModelKind::FlatTorus: {
      Vec z = x.coords + t * v.components;
      return make_point(z);
    }
    case ModelKind::TriaxialEllipsoid:
      p.coords = from3(ellipsoid_exp_impl(std::get<EllipsoidModel>(model_).axes, head3(x.coords), t * head3(v.components)));
      break;
    case ModelKind::CircleTimesSphere: {
      const auto& pm = std::get<ProductModel>(model_);
      p.coords[0] = circle_reduce(pm.circle_length, x.coords[0] + t * v.components[0]);
      p.coords.segment<3>(1) = sphere_exp(pm.sphere_radius, head3(x.coords, 1), t * head3(v.components, 1));
      break;
    }
  }
  return p;
}

Point Manifold::geodesic_between(const Point& x, const Point& y, double s) const {
  if (s == 0.0) return x;
  if (s == 1.0) return y;
  const Tangent v = log(x, y);
  if (v.components.norm() == 0.0) return x;
  return exp(v, s);
}

double Manifold::inner(const Point&, const Vec& u, const Vec& w) const { return u.dot(w); }

Vec Manifold::project_tangent(const Point& x, const Vec& v) const {
  switch (kind_) {
    case ModelKind::RoundSphere: {
      const Vector3d n = head3(x.coords).normalized();
      return from3(head3(v) - head3(v).dot(n) * n);
    }
    case ModelKind::FlatTorus: return v;
    case ModelKind::TriaxialEllipsoid:
      return from3(ellipsoid_project(std::get<EllipsoidModel>(model_).axes, head3(x.coords), head3(v)));
    case ModelKind::CircleTimesSphere: {
      Vec out = v;
      const Vector3d n = head3(x.coords, 1).normalized();
      out.segment<3>(1) = head3(v, 1) - head3(v, 1).dot(n) * n;
      return out;
    }
  }
  return v;
}

Frame Manifold::tangent_basis(const Point& x) const {
  switch (kind_) {
    case ModelKind::RoundSphere: {
      Frame f(3, 2);
      f = plane_basis(head3(x.coords).normalized());
      return f;
    }
    case ModelKind::FlatTorus: {
      Frame f(2, 2);
      f.setIdentity();
      return f;
    }
    case ModelKind::TriaxialEllipsoid: {
      Frame f(3, 2);
      f = plane_basis(ellipsoid_normal(std::get<EllipsoidModel>(model_).axes, head3(x.coords)));
      return f;
    }
    case ModelKind::CircleTimesSphere: {
      Frame f = Frame::Zero(4, 3);
      f(0, 0) = 1.0;
      f.block<3, 2>(1, 1) = plane_basis(head3(x.coords, 1).normalized());
      return f;
    }
  }
  return Frame();
}

Point Manifold::retract(const Point& x, const Vec& v) const {
  Point p = x;
  switch (kind_) {
    case ModelKind::RoundSphere:
      p.coords = from3(sphere_retract(std::get<SphereModel>(model_).radius, head3(x.coords), head3(v)));
      return p;
    case ModelKind::FlatTorus: return make_point(x.coords + v);
    case ModelKind::TriaxialEllipsoid:
      p.coords = from3(ellipsoid_reduce(std::get<EllipsoidModel>(model_).axes, head3(x.coords) + head3(v)));
      return p;
    case ModelKind::CircleTimesSphere: {
      const auto& pm = std::get<ProductModel>(model_);
      p.coords[0] = circle_reduce(pm.circle_length, x.coords[0] + v[0]);
      p.coords.segment<3>(1) = sphere_retract(pm.sphere_radius, head3(x.coords, 1), head3(v, 1));
      return p;
    }
  }
  return p;
}

Frame Manifold::retract_differential(const Point& x, const Vec& v, const Frame& basis) const {
  switch (kind_) {
    case ModelKind::RoundSphere: {
      const Eigen::Matrix3d j = sphere_retract_jac(std::get<SphereModel>(model_).radius, head3(x.coords), head3(v));
      return Frame(j * basis);
    }
    case ModelKind::FlatTorus: return basis;
    case ModelKind::TriaxialEllipsoid: {
      const auto& axes = std::get<EllipsoidModel>(model_).axes;
      const Vector3d z = head3(x.coords) + head3(v);
      const Vector3d az = z.cwiseQuotient(axes.cwiseProduct(axes));
      const double s = std::sqrt(z.dot(az));
      const Eigen::Matrix3d j = Eigen::Matrix3d::Identity() / s - z * az.transpose() / (s * s * s);
      return Frame(j * basis);
    }
    case ModelKind::CircleTimesSphere: {
      const auto& pm = std::get<ProductModel>(model_);
      Eigen::Matrix4d j = Eigen::Matrix4d::Zero();
      j(0, 0) = 1.0;
      j.block<3, 3>(1, 1) = sphere_retract_jac(pm.sphere_radius, head3(x.coords, 1), head3(v, 1));
      return Frame(j * basis);
    }
  }
  return basis;
}

Point Manifold::random_point(Rng& rng) const {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  switch (kind_) {
    case ModelKind::RoundSphere:
    case ModelKind::TriaxialEllipsoid: {
      Vec z(3);
      for (int i = 0; i < 3; ++i) z[i] = normal(rng);
      return make_point(z);
    }
    case ModelKind::FlatTorus: {
      const auto& lat = std::get<TorusModel>(model_).lattice;
      const Eigen::Vector2d u(unif(rng), unif(rng));
      Vec z(2);
      z = lat * u;
      return make_point(z);
    }
    case ModelKind::CircleTimesSphere: {
      const auto& pm = std::get<ProductModel>(model_);
      Vec z(4);
      z[0] = unif(rng) * pm.circle_length;
      for (int i = 1; i < 4; ++i) z[i] = normal(rng);
      return make_point(z);
    }
  }
  return Point{};
}

Vec Manifold::random_tangent(const Point& x, double length, Rng& rng) const {
  std::normal_distribution<double> normal;
  const Frame basis = tangent_basis(x);
  Eigen::VectorXd c(basis.cols());
  for (int i = 0; i < c.size(); ++i) c[i] = normal(rng);
  return Vec(basis * (c * (length / c.norm())));
}

double Manifold::gaussian_curvature(const Point& x) const {
  switch (kind_) {
    case ModelKind::RoundSphere: {
      const double r = std::get<SphereModel>(model_).radius;
      return 1.0 / (r * r);
    }
    case ModelKind::FlatTorus: return 0.0;
    case ModelKind::TriaxialEllipsoid: {
      const auto& ax = std::get<EllipsoidModel>(model_).axes;
      const Vector3d p = head3(x.coords);
      const double s = p.cwiseQuotient(ax.cwiseProduct(ax)).squaredNorm();
      const double abc = ax[0] * ax[1] * ax[2];
      return 1.0 / (abc * abc * s * s);
    }
    case ModelKind::CircleTimesSphere: break;
  }
  throw Error(ErrorCode::PreViolation, "Gaussian curvature is defined on surfaces only");
}

}  // namespace geolab
