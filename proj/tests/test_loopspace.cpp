#include "geolab/error.hpp"
#include "geolab/loopspace.hpp"
#include "geolab/serialize.hpp"
#include "geolab/starts.hpp"

#include <doctest.h>

#include <numbers>

using namespace geolab;

namespace {
constexpr double kPi = std::numbers::pi;

Point sphere_point(const Manifold& m, double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return m.make_point(v);
}
}  // namespace

TEST_CASE("time grids") {
  CHECK(TimeGrid::spacing_limit(kPi, 1.0, 40.0) == doctest::Approx(kPi * kPi / 360.0));
  const TimeGrid p = TimeGrid::pinned(32, 1.0, 0.25);
  CHECK(p.k() == 32);
  CHECK(p.q_prime() == doctest::Approx(0.25));
  const TimeGrid a = TimeGrid::automatic(1.0, 0.0, kPi, 45.0);
  CHECK(a.satisfies_spacing_bound(kPi, 45.0));
  CHECK(a.k() % 2 == 0);
  CHECK_FALSE(TimeGrid::uniform(32, 1.0).satisfies_spacing_bound(kPi, 4.0 * kPi * kPi));
}

TEST_CASE("energy of inscribed polygons") {
  const Manifold s = Manifold::round_sphere();
  for (int k : {8, 16, 33}) {
    const BrokenLoop gc = great_circle(s, make_grid(TimeGrid::uniform(k, 1.0)), {0, 0, 1}, {1, 0, 0});
    // Nodes sit on the great circle, so every segment is an arc of 2 pi / k.
    CHECK(energy_Fq(s, gc) == doctest::Approx(4.0 * kPi * kPi).epsilon(1e-12));
  }
  const Manifold t = Manifold::flat_torus();
  const BrokenLoop line = torus_line(t, make_grid(TimeGrid::uniform(10, 2.0)), {0.1, 0.2}, {1, 1});
  CHECK(energy_Fq(t, line) == doctest::Approx(2.0 / 4.0).epsilon(1e-12));
}

TEST_CASE("invariance tie and validation") {
  const Setting s{Manifold::round_sphere(), Isometry::rotation({0, 0, 1}, 1.0)};
  const GridPtr g = make_grid(TimeGrid::pinned(32, 1.0, 1.0 / (2.0 * kPi)));
  Rng rng(3);
  const BrokenLoop loop = random_loop(s, g, 0.05, rng);
  CHECK(constraint_residual(s, loop) < 1e-12);
  CHECK_NOTHROW(validate_loop(s, loop));
  BrokenLoop broken = loop;
  broken.at(g->k_prime) = sphere_point(s.manifold, 0, 0, 1);
  CHECK_THROWS_AS(validate_loop(s, broken), Error);
}

TEST_CASE("iteration energy identity on a rotated sphere") {
  const Setting s{Manifold::round_sphere(), Isometry::rotation({0, 0, 1}, kPi)};
  const GridPtr g = make_grid(TimeGrid::pinned(16, 1.0, 0.5));
  Rng rng(4);
  for (long long m : {1, 3, 5}) {
    const PeriodData pd = PeriodData::for_order(Rational(1, 2), Rational(1), m);
    CHECK(pd.q_prime == Rational(1, 2));
    const EnergyIdentity e = iterated_energy_identity_check(s.manifold, random_loop(s, g, 0.1, rng), pd);
    CHECK(e.residual < 1e-12);
  }
}

TEST_CASE("residue classes") {
  const auto classes = residue_partition(Rational(1, 2), Rational(1), 1, 4);
  REQUIRE(classes.size() == 2);
  CHECK(classes.at(Rational(1, 2)) == std::vector<long long>{1, 3});
  CHECK(classes.at(Rational(0)) == std::vector<long long>{2, 4});
  CHECK(parse_rational("3/4") == Rational(3, 4));
  CHECK(parse_rational("2") == Rational(2));
  CHECK_THROWS_AS(PeriodData::for_order(Rational(2), Rational(3), 1), Error);
  CHECK_THROWS_AS((PeriodData{Rational(1), Rational(1), Rational(1, 2), 1}.validate()), Error);
}

TEST_CASE("polydiscs") {
  const Setting s{Manifold::round_sphere(), Isometry::identity()};
  const GridPtr g = make_grid(TimeGrid::uniform(8, 1.0));
  Rng rng(5);
  const BrokenLoop c = random_loop(s, g, 0.1, rng);
  CHECK(in_polydisc(s.manifold, c, 0.1, c));
  CHECK_THROWS_AS(in_polydisc(s.manifold, c, 2.0, c), Error);
  const BrokenLoop far = great_circle(s.manifold, g, {0, 0, 1}, {1, 0, 0});
  CHECK(dist_upsilon(s.manifold, far, far) == 0.0);
}

TEST_CASE("image distance ignores the parametrisation phase") {
  const Manifold m = Manifold::round_sphere();
  const GridPtr g = make_grid(TimeGrid::uniform(32, 1.0));
  const BrokenLoop a = great_circle(m, g, {0, 0, 1}, {1, 0, 0});
  const BrokenLoop b = great_circle(m, g, {0, 0, 1}, {std::cos(0.07), std::sin(0.07), 0});
  CHECK(image_distance(m, image_signature(m, a), image_signature(m, b)) < 1e-3);
  const BrokenLoop c = rotation_orbit(m, g, {0, 0, 1}, sphere_point(m, std::cos(0.1), 0, std::sin(0.1)));
  CHECK(image_distance(m, image_signature(m, a), image_signature(m, c)) == doctest::Approx(0.1).epsilon(1e-3));
}

TEST_CASE("loop records round-trip through JSON") {
  const Setting s{Manifold::circle_times_sphere(2.0, 1.0), Isometry::product(0.5, {0, 0, 1}, 0.7)};
  const GridPtr g = make_grid(TimeGrid::pinned(12, 1.0, 0.25));
  Rng rng(6);
  const BrokenLoop loop = random_loop(s, g, 0.1, rng);
  const BrokenLoop back = loop_from_json(json::parse(loop_to_json(loop).dump()));
  CHECK(*back.grid == *loop.grid);
  CHECK(dist_upsilon(s.manifold, loop, back) == 0.0);
  json bad = loop_to_json(loop);
  bad["nodes"].erase(0);
  CHECK_THROWS_AS(loop_from_json(bad), Error);
}
