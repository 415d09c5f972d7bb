#include "geolab/error.hpp"
#include "geolab/flows.hpp"
#include "geolab/morse.hpp"
#include "geolab/starts.hpp"

#include <doctest.h>

#include <numbers>

using namespace geolab;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("spectrum thresholds") {
  Eigen::VectorXd d(5);
  d << -2.0, -1.0, 0.0, 1e-9, 3.0;
  const SpectrumReport r = analyze_spectrum(d.asDiagonal().toDenseMatrix());
  CHECK(r.index == 2);
  CHECK(r.nullity == 2);
  CHECK(r.eigenvalues.front() == -2.0);
}

TEST_CASE("great circle index matches the Jacobi oracle and survives rescaling") {
  const Setting s{Manifold::round_sphere(), Isometry::identity()};
  const GridPtr g = make_grid(TimeGrid::uniform(16, 1.0));
  const BrokenLoop gc = great_circle(s.manifold, g, {0, 0, 1}, {1, 0, 0});
  const GeodesicRecord rec = make_record(s, gc, FlowConfig{});
  CHECK(rec.index == 1);
  for (long long m = 0; m < 3; ++m) {
    const PeriodData pd{Rational(1), Rational(1), Rational(0), m};
    const SpectrumReport a = discrete_hessian(s, rec, pd);
    const SpectrumReport b = discrete_hessian(s, rec, pd, true);
    Vec u(3);
    u << 0, 1, 0;
    CHECK(a.index == jacobi_conjugate_count(s.manifold, Tangent{gc.at(0), u}, 2.0 * kPi * (m + 1)));
    CHECK(a.index == b.index);
    CHECK(a.nullity == b.nullity);
    CHECK(a.nullity >= 1);
  }
}

TEST_CASE("the flat torus has no conjugate points") {
  const Manifold t = Manifold::flat_torus();
  Vec u(2);
  u << 1, 0;
  CHECK(jacobi_conjugate_count(t, Tangent{t.make_point(Vec::Zero(2)), u}, 50.0) == 0);
}

TEST_CASE("dichotomy verdicts") {
  const Setting tor{Manifold::flat_torus(), Isometry::identity()};
  const GridPtr g = make_grid(TimeGrid::uniform(16, 1.0));
  const GeodesicRecord line = make_record(tor, torus_line(tor.manifold, g, {0, 0}, {0, 1}), FlowConfig{});
  CHECK(line.nullity >= 2);
  CHECK(dichotomy_scan(tor, line, Rational(1), Rational(1), 6).verdict == Verdict::AllZero);

  const Setting sph{Manifold::round_sphere(), Isometry::identity()};
  const GeodesicRecord gc = make_record(sph, great_circle(sph.manifold, g, {0, 0, 1}, {1, 0, 0}), FlowConfig{});
  const DichotomyScan grow = dichotomy_scan(sph, gc, Rational(1), Rational(1), 4);
  CHECK(grow.verdict == Verdict::Growing);
  // The same indices do not clear an unreachable threshold.
  CHECK(dichotomy_scan(sph, gc, Rational(1), Rational(1), 4, 1000).verdict == Verdict::Inconclusive);
}

TEST_CASE("non-critical records are rejected") {
  const Setting s{Manifold::round_sphere(), Isometry::identity()};
  Rng rng(1);
  const GeodesicRecord rec = make_record(s, random_loop(s, make_grid(TimeGrid::uniform(16, 1.0)), 0.1, rng), FlowConfig{});
  CHECK_THROWS_AS(discrete_hessian(s, rec, PeriodData{Rational(1), Rational(1), Rational(0), 1}), Error);
}
