#include "geolab/isometry.hpp"
#include "geolab/manifold.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <numbers>

using namespace geolab;

namespace {

constexpr double kPi = std::numbers::pi;

Point on_sphere(const Manifold& m, double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return m.make_point(v);
}

std::vector<Manifold> catalog() {
  Eigen::Matrix2d lattice;
  lattice << 1.0, 0.3, 0.0, 1.2;
  return {Manifold::round_sphere(2.0), Manifold::flat_torus(lattice), Manifold::ellipsoid(1.0, 1.1, 1.2),
          Manifold::circle_times_sphere(2.0, 1.0)};
}

}  // namespace

TEST_CASE("sphere distance is the central angle") {
  const Manifold m = Manifold::round_sphere(2.0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Point a = m.random_point(rng);
    const Point b = m.random_point(rng);
    const double angle = std::acos(std::clamp(a.coords.dot(b.coords) / 4.0, -1.0, 1.0));
    CHECK(m.dist(a, b) == doctest::Approx(2.0 * angle).epsilon(1e-12));
  }
}

TEST_CASE("torus distance is the shortest lattice translate") {
  Eigen::Matrix2d lattice;
  lattice << 1.0, 0.3, 0.0, 1.2;
  const Manifold m = Manifold::flat_torus(lattice);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Point a = m.random_point(rng);
    const Point b = m.random_point(rng);
    double best = 1e300;
    for (int u = -3; u <= 3; ++u) {
      for (int v = -3; v <= 3; ++v) {
        const Eigen::Vector2d d = b.coords.head<2>() - a.coords.head<2>() + lattice * Eigen::Vector2d(u, v);
        best = std::min(best, d.norm());
      }
    }
    CHECK(m.dist(a, b) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("exp inverts log below the injectivity radius") {
  for (const Manifold& m : catalog()) {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      const Point x = m.random_point(rng);
      const Point y = m.exp(Tangent{x, m.random_tangent(x, 0.5 * m.injrad() * std::uniform_real_distribution<double>(0, 1)(rng), rng)});
      const Tangent v = m.log(x, y);
      CHECK(m.dist(m.exp(v), y) < 1e-9);
      CHECK(m.norm(x, v.components) == doctest::Approx(m.dist(x, y)).epsilon(1e-9));
    }
  }
}

TEST_CASE("ellipsoid shooting along a principal ellipse reaches the antipode after half its perimeter") {
  const double a = 1.0, b = 1.1;
  const Manifold m = Manifold::ellipsoid(a, b, 1.2);
  const double perimeter = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double t) { return std::hypot(a * std::sin(t), b * std::cos(t)); }, 0.0, 2.0 * kPi);
  Vec v(3);
  v << 0.0, 1.0, 0.0;
  const Point end = m.exp(Tangent{on_sphere(m, a, 0, 0), v}, 0.5 * perimeter);
  CHECK((end.coords - Eigen::Vector3d(-a, 0, 0)).norm() < 1e-8);
}

TEST_CASE("ellipsoid with equal axes matches the round sphere") {
  const Manifold e = Manifold::ellipsoid(1.0, 1.0, 1.0);
  const Manifold s = Manifold::round_sphere(1.0);
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const Point x = s.random_point(rng);
    const Vec v = s.random_tangent(x, 1.3, rng);
    CHECK((e.exp(Tangent{x, v}).coords - s.exp(Tangent{x, v}).coords).norm() < 1e-9);
  }
}

TEST_CASE("catalog isometries preserve the metric") {
  Rng rng(5);
  const std::vector<std::pair<Manifold, Isometry>> cases = {
      {Manifold::round_sphere(), Isometry::rotation({1, 2, 3}, 0.7)},
      {Manifold::flat_torus(), Isometry::translation({0.3, 0.4})},
      {Manifold::ellipsoid(1.0, 1.1, 1.2), Isometry::rotation({0, 0, 1}, kPi)},
      {Manifold::circle_times_sphere(2.0, 1.0), Isometry::product(0.5, {0, 0, 1}, 1.0)},
  };
  for (const auto& [m, iso] : cases) {
    const IsometryCheck c = verify_isometry(m, iso, 20, rng);
    CHECK(c.max_metric_defect < 1e-9);
    CHECK(c.max_distance_defect < 1e-9);
    CHECK(c.max_inverse_defect < 1e-12);
  }
}

TEST_CASE("curvature of the round sphere") {
  const Manifold m = Manifold::round_sphere(2.0);
  CHECK(m.gaussian_curvature(on_sphere(m, 0, 0, 2)) == doctest::Approx(0.25));
  CHECK(Manifold::flat_torus().gaussian_curvature(Manifold::flat_torus().make_point(Vec::Zero(2))) == 0.0);
}
