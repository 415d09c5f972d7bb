#include "geolab/commands.hpp"
#include "geolab/error.hpp"
#include "geolab/flows.hpp"
#include "geolab/homotopy.hpp"
#include "geolab/starts.hpp"

#include <doctest.h>

#include <numbers>

using namespace geolab;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<BrokenLoop> torus_vertices(const Setting& s, const GridPtr& g, int n, double spread, Rng& rng) {
  const BrokenLoop base = torus_line(s.manifold, g, {0.3, 0.4}, {1, 0});
  std::vector<BrokenLoop> v;
  for (int i = 0; i < n; ++i) v.push_back(perturb_loop(s, base, spread, rng));
  return v;
}

Barycentric bary(std::initializer_list<double> b) {
  Barycentric out(static_cast<Eigen::Index>(b.size()));
  int i = 0;
  for (double x : b) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("barycentric grids and face maps") {
  CHECK(barycentric_grid(2, 4).size() == 15);
  CHECK(barycentric_grid(3, 2).size() == 10);
  const Barycentric f = face_map(bary({0.25, 0.75}), 1);
  CHECK(f.size() == 3);
  CHECK(f[1] == 0.0);
  CHECK(f[0] == 0.25);
  CHECK(f[2] == 0.75);
}

TEST_CASE("simplices restrict to the simplices of their faces") {
  const Setting s{Manifold::flat_torus(), Isometry::identity()};
  const GridPtr g = make_grid(TimeGrid::uniform(8, 1.0));
  Rng rng(1);
  const auto v = torus_vertices(s, g, 3, 0.02, rng);
  for (int l = 0; l < 3; ++l) {
    std::vector<BrokenLoop> face = v;
    face.erase(face.begin() + l);
    for (const Barycentric& b : barycentric_grid(1, 6)) {
      const BrokenLoop whole = simplex_point(s, v, face_map(b, l));
      const BrokenLoop part = simplex_point(s, face, b);
      CHECK(dist_upsilon(s.manifold, whole, part) < 1e-12);
    }
  }
  // The one-simplex is the geodesic interpolation.
  const BrokenLoop mid = simplex_point(s, {v[0], v[1]}, bary({0.5, 0.5}));
  CHECK(dist_upsilon(s.manifold, mid, interpolate_loops(s, v[0], v[1], 0.5)) < 1e-12);
  const BrokenLoop flat = simplex_point(s, {v[0], v[0], v[0]}, bary({0.2, 0.3, 0.5}));
  CHECK(dist_upsilon(s.manifold, flat, v[0]) < 1e-12);
}

TEST_CASE("simplex samples stay within delta of every vertex") {
  const Setting s{Manifold::flat_torus(), Isometry::identity()};
  const GridPtr g = make_grid(TimeGrid::uniform(8, 1.0));
  Rng rng(2);
  const double delta = 0.1;
  const auto v = torus_vertices(s, g, 3, 0.02, rng);
  const LoopSimplex simplex = build_simplex(s, v, delta, 8);
  CHECK(simplex.samples.size() == barycentric_grid(2, 8).size());
  for (const BrokenLoop& x : simplex.samples) {
    for (const BrokenLoop& w : v) CHECK(dist_upsilon(s.manifold, x, w) < delta);
  }
  CHECK_THROWS_AS(build_simplex(s, {v[0], torus_line(s.manifold, g, {0.3, 0.7}, {1, 0})}, delta, 4), Error);
  CHECK_THROWS_AS(build_simplex(s, v, 10.0, 4), Error);
}

TEST_CASE("Bangert homotopy fixes the boundary and tracks the base point") {
  const Manifold t = Manifold::flat_torus();
  const GridPtr g = make_grid(TimeGrid::uniform(32, 1.0));
  const LoopFamily fam = torus_circle_family(t, g, 65, 0.2);
  const BangertHomotopyResult h = bangert_homotopy(t, fam, 4, 8, 5);
  REQUIRE(h.theta.size() == 5);
  for (const auto& row : h.theta) {
    for (std::size_t e : {std::size_t{0}, row.size() - 1}) {
      const IteratedLoop& a = row[e];
      const IteratedLoop& b = h.theta.front()[e];
      REQUIRE(a.nodes.size() == b.nodes.size());
      double gap = 0.0;
      for (std::size_t i = 0; i < a.nodes.size(); ++i) gap = std::max(gap, t.dist(a.nodes[i], b.nodes[i]));
      CHECK(gap == 0.0);
    }
  }
  for (std::size_t a = 0; a < h.theta.size(); ++a) {
    for (std::size_t b = 0; b < h.x_grid.size(); ++b) {
      // theta_0(y)(0) = centre + (0.2 sin(pi y), 0).
      const double y = h.y[a][b];
      Vec expect(2);
      expect << 0.5 + 0.2 * std::sin(kPi * y), 0.5;
      CHECK(t.dist(h.theta[a][b].nodes.front(), t.make_point(expect)) < 1e-3);
    }
  }
  CHECK(h.theta1().front().period() == doctest::Approx(4.0));
  CHECK(h.boundary_max == 0.0);
}

TEST_CASE("Bangert homotopy of a constant family has no excess") {
  const Manifold s = Manifold::round_sphere();
  const GridPtr g = make_grid(TimeGrid::uniform(16, 1.0));
  const LoopFamily fam = constant_family(s, g, 5, s.make_point(Vec(Eigen::Vector3d::UnitX())));
  const BangertScan scan = bangert_scan(s, fam, {2, 4});
  CHECK(scan.deltas == std::vector<double>{0.0, 0.0});

  // The iterate runs three times as long at the same speed, so the period-normalised energy is unchanged.
  const BrokenLoop gc = great_circle(s, g, {0, 0, 1}, {1, 0, 0});
  CHECK(iterated_energy(s, iterate_loop(gc, 3)) == doctest::Approx(energy_Fq(s, gc)).epsilon(1e-12));
}

TEST_CASE("Bangert excess decays like 1/m on the sphere") {
  const Manifold s = Manifold::round_sphere();
  const BangertScan scan = bangert_scan(s, sphere_latitude_family(s, make_grid(TimeGrid::uniform(32, 1.0)), 65, 0.3), {2, 4, 8, 16});
  double lo = 1e300, hi = 0.0;
  for (std::size_t i = 0; i < scan.ms.size(); ++i) {
    lo = std::min(lo, scan.ms[i] * scan.deltas[i]);
    hi = std::max(hi, scan.ms[i] * scan.deltas[i]);
  }
  CHECK(lo > 0.0);
  CHECK(hi <= 4.0 * lo);
  CHECK(scan.exponent == doctest::Approx(-1.0).epsilon(0.3));
}

TEST_CASE("Bangert homotopy needs one grid") {
  const Manifold t = Manifold::flat_torus();
  LoopFamily fam = torus_circle_family(t, make_grid(TimeGrid::uniform(16, 1.0)), 5, 0.1);
  fam.curves[2] = torus_circle_family(t, make_grid(TimeGrid::uniform(16, 2.0)), 5, 0.1).curves[2];
  CHECK_THROWS_AS(bangert_homotopy(t, fam, 2), Error);
}

namespace {

PathFamily latitudes(const Setting& s, const GridPtr& g, const PeriodData& pd, double z_lo, double z_hi, int n) {
  PathFamily fam;
  for (int i = 0; i < n; ++i) {
    const double x = double(i) / (n - 1);
    const double z = z_lo + (z_hi - z_lo) * x;
    Vec y(3);
    y << std::sqrt(1 - z * z), 0, z;
    Eigen::VectorXd p(1);
    p[0] = x;
    fam.params.push_back(p);
    fam.boundary.push_back(i == 0 || i == n - 1);
    fam.curves.push_back(iterate_embedding(rotation_orbit(s.manifold, g, {0, 0, 1}, s.manifold.make_point(y)), pd));
  }
  return fam;
}

}  // namespace

TEST_CASE("escape pushes a family through the doubled great circle below its level") {
  const Setting s{Manifold::round_sphere(), Isometry::identity()};
  const GridPtr g = make_grid(TimeGrid::uniform(16, 1.0));
  const GeodesicRecord rec = make_record(s, great_circle(s.manifold, g, {0, 0, 1}, {1, 0, 0}), FlowConfig{});
  const PeriodData pd{Rational(1), Rational(1), Rational(0), 1};
  // The middle sample sits exactly on the critical circle.
  const PathFamily fam = latitudes(s, g, pd, -1.0, 1.0, 33);
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const EscapeResult r = escape_negative_directions(s, fam, rec, pd, rng);
    CHECK(r.index == 3);
    CHECK(r.max_before == doctest::Approx(r.level).epsilon(1e-12));
    CHECK(r.max_after < r.level);
    CHECK(r.monotone);
    CHECK(r.below_level);
  }

  Rng rng(1);
  const PathFamily low = latitudes(s, g, pd, 0.6, 0.95, 9);
  const EscapeResult untouched = escape_negative_directions(s, low, rec, pd, rng);
  CHECK(untouched.moved.empty());
  for (std::size_t i = 0; i < low.size(); ++i) {
    for (std::size_t j = 0; j < low.curves[i].nodes.size(); ++j) {
      CHECK(untouched.family.curves[i].nodes[j].coords == low.curves[i].nodes[j].coords);
    }
  }

  const PeriodData once{Rational(1), Rational(1), Rational(0), 0};
  Rng rng2(2);
  CHECK_THROWS_AS(escape_negative_directions(s, latitudes(s, g, once, -1.0, 1.0, 9), rec, once, rng2), Error);
}

TEST_CASE("minimax over torus translates returns the class minimum") {
  const Setting s{Manifold::flat_torus(), Isometry::identity()};
  const MinimaxResult r =
      minimax(s, torus_translates_family(s.manifold, make_grid(TimeGrid::uniform(16, 1.0)), 32, {1, 0}), FlowConfig{}, MinimaxConfig{});
  CHECK_FALSE(r.flag);
  CHECK(r.c == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("minimax over a latitude sweep finds the equator") {
  for (const Isometry& iso : {Isometry::identity(), Isometry::rotation({0, 0, 1}, 1.0)}) {
    const Setting s{Manifold::round_sphere(), iso};
    const GridPtr g = make_grid(iso.is_identity() ? TimeGrid::uniform(32, 1.0) : TimeGrid::pinned(32, 1.0, 1.0 / (2.0 * kPi)));
    const MinimaxResult r = minimax(s, latitude_sweep_family(s, g, 33), FlowConfig{}, MinimaxConfig{});
    CHECK_FALSE(r.flag);
    CHECK(r.c == doctest::Approx(4.0 * kPi * kPi).epsilon(1e-8));
    REQUIRE(r.record);
    CHECK(r.record->kind == RecordKind::Geodesic);
    CHECK(r.c > r.family_min + 1e-9);
  }
}
