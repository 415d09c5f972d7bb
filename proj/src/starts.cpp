#include "geolab/starts.hpp"

#include "geolab/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace geolab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::Vector3d rotate(const Eigen::Vector3d& axis, double angle, const Eigen::Vector3d& x) {
  return Eigen::AngleAxisd(angle, axis.normalized()) * x;
}

/// Sphere coordinates of a point (the S^2 factor on S^1 x S^2).
int sphere_offset(const Manifold& m) { return m.kind() == ModelKind::CircleTimesSphere ? 1 : 0; }

Point rotated(const Manifold& m, const Point& x, const Eigen::Vector3d& axis, double angle) {
  Vec z = x.coords;
  const int off = sphere_offset(m);
  z.segment<3>(off) = rotate(axis, angle, x.coords.segment<3>(off));
  return m.make_point(z);
}

/// Path u in [0,1] from x to I(x), or a small closed excursion for the identity.
Point reference_path(const Setting& s, const Point& x, double u, const Eigen::Vector3d& wobble_axis) {
  const Manifold& m = s.manifold;
  const Eigen::VectorXd par = s.isometry.parameters();
  switch (s.isometry.kind()) {
    case IsometryKind::Identity: {
      if (m.kind() == ModelKind::FlatTorus) {
        Vec z = x.coords;
        z[0] += 0.1 * std::sin(kTwoPi * u);
        z[1] += 0.1 * (1.0 - std::cos(kTwoPi * u));
        return m.make_point(z);
      }
      return rotated(m, x, wobble_axis, 0.5 * std::sin(std::numbers::pi * u));
    }
    case IsometryKind::Translation: {
      Vec z = x.coords;
      z[0] += u * par[0];
      z[1] += u * par[1];
      return m.make_point(z);
    }
    case IsometryKind::Rotation: return rotated(m, x, par.head<3>(), u * par[3]);
    case IsometryKind::Product: {
      Point p = rotated(m, x, par.segment<3>(1), u * par[4]);
      p.coords[0] += u * par[0];
      return m.make_point(p.coords);
    }
  }
  return x;
}

Point fixed_point(const Setting& s, Rng& rng) {
  const Manifold& m = s.manifold;
  if (s.isometry.is_identity()) return m.random_point(rng);
  if (s.isometry.kind() != IsometryKind::Rotation) {
    throw Error(ErrorCode::PreViolation, "k' = 0 needs an isometry with fixed points");
  }
  Vec z(3);
  z = s.isometry.parameters().head<3>();
  if (std::bernoulli_distribution(0.5)(rng)) z = -z;
  return m.make_point(z);
}

}  // namespace

BrokenLoop sample_curve(const GridPtr& grid, const std::function<Point(double)>& curve) {
  BrokenLoop loop{grid, {}};
  loop.nodes.reserve(static_cast<std::size_t>(grid->k()));
  for (int i = 1; i <= grid->k(); ++i) loop.nodes.push_back(curve(grid->taus[static_cast<std::size_t>(i)]));
  return loop;
}

BrokenLoop constant_loop(const GridPtr& grid, const Point& x) {
  return BrokenLoop{grid, std::vector<Point>(static_cast<std::size_t>(grid->k()), x)};
}

BrokenLoop great_circle(const Manifold& m, const GridPtr& grid, const Eigen::Vector3d& normal,
                        const Eigen::Vector3d& start, int windings) {
  const Eigen::Vector3d n = normal.normalized();
  const Eigen::Vector3d e1 = (start - start.dot(n) * n).normalized();
  const int off = sphere_offset(m);
  const double q = grid->q();
  return sample_curve(grid, [&](double t) {
    Vec z = Vec::Zero(m.ambient_dimension());
    z.segment<3>(off) = rotate(n, kTwoPi * windings * t / q, e1);
    return m.make_point(z);
  });
}

BrokenLoop torus_line(const Manifold& m, const GridPtr& grid, const Eigen::Vector2d& base, const Eigen::Vector2i& winding) {
  if (m.kind() != ModelKind::FlatTorus) throw Error(ErrorCode::PreViolation, "torus_line needs the flat torus");
  const Eigen::Vector2d span = std::get<TorusModel>(m.model()).lattice * winding.cast<double>();
  const double q = grid->q();
  return sample_curve(grid, [&](double t) {
    Vec z(2);
    z = base + span * (t / q);
    return m.make_point(z);
  });
}

BrokenLoop rotation_orbit(const Manifold& m, const GridPtr& grid, const Eigen::Vector3d& axis, const Point& x, int n) {
  const double q = grid->q();
  return sample_curve(grid, [&](double t) { return rotated(m, x, axis, kTwoPi * n * t / q); });
}

BrokenLoop perturb_loop(const Setting& s, const BrokenLoop& loop, double size, Rng& rng) {
  const Manifold& m = s.manifold;
  const int k = loop.k();
  const int kp = loop.grid->k_prime;
  BrokenLoop out = loop;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 1; i <= k; ++i) {
    if (i == kp) continue;
    if (i == k && kp == 0 && !s.isometry.is_identity()) continue;
    out.at(i) = m.retract(loop.at(i), m.random_tangent(loop.at(i), size * unit(rng), rng));
  }
  if (kp > 0) out.at(kp) = s.isometry.apply(m, out.at(k));
  return out;
}

BrokenLoop random_symmetric_loop(const Setting& s, const GridPtr& grid, double step, Rng& rng) {
  const Manifold& m = s.manifold;
  const int k = grid->k();
  const int kp = grid->k_prime;
  if (kp == 0 || 2 * kp != k) throw Error(ErrorCode::PreViolation, "symmetric loops need k = 2 k'");
  const Point x = m.random_point(rng);
  const Point ix = s.isometry.apply(m, x);
  if (m.dist(s.isometry.apply(m, ix), x) > 1e-9) throw Error(ErrorCode::PreViolation, "symmetric loops need I^2 = id");
  Eigen::Vector3d wobble;
  std::normal_distribution<double> normal;
  for (int i = 0; i < 3; ++i) wobble[i] = normal(rng);
  const double qp = grid->q_prime();
  BrokenLoop loop{grid, std::vector<Point>(static_cast<std::size_t>(k))};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 1; i < kp; ++i) {
    const Point c = reference_path(s, x, grid->taus[static_cast<std::size_t>(i)] / qp, wobble);
    loop.at(i) = m.retract(c, m.random_tangent(c, step * unit(rng), rng));
    loop.at(kp + i) = s.isometry.apply(m, loop.at(i));
  }
  loop.at(k) = x;
  loop.at(kp) = ix;
  return loop;
}

BrokenLoop random_loop(const Setting& s, const GridPtr& grid, double step, Rng& rng) {
  const Manifold& m = s.manifold;
  const int kp = grid->k_prime;
  std::normal_distribution<double> normal;
  Eigen::Vector3d wobble;
  for (int i = 0; i < 3; ++i) wobble[i] = normal(rng);
  const double q = grid->q();
  const double qp = grid->q_prime();
  BrokenLoop loop;
  if (kp == 0) {
    const Point x = fixed_point(s, rng);
    const Setting id{m, Isometry::identity()};
    loop = sample_curve(grid, [&](double t) { return reference_path(id, x, t / q, wobble); });
    loop.at(grid->k()) = x;
  } else {
    const Point x = m.random_point(rng);
    loop = sample_curve(grid, [&](double t) {
      const double u = t <= qp ? t / qp : 1.0 - (t - qp) / (q - qp);
      return reference_path(s, x, u, wobble);
    });
    loop.at(grid->k()) = x;
  }
  return perturb_loop(s, loop, step, rng);
}

}  // namespace geolab
