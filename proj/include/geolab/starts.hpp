#pragma once

#include "geolab/loopspace.hpp"

#include <functional>

namespace geolab {

/// Nodes zeta(tau_i), i = 1..k, of a curve given as a function of time.
BrokenLoop sample_curve(const GridPtr& grid, const std::function<Point(double)>& curve);

BrokenLoop constant_loop(const GridPtr& grid, const Point& x);

/// Great circle of the sphere (or of the S^2 factor) with unit normal `normal`,
/// traversed `windings` times over [0, q] starting at `start` (projected onto the circle).
BrokenLoop great_circle(const Manifold& m, const GridPtr& grid, const Eigen::Vector3d& normal,
                        const Eigen::Vector3d& start, int windings = 1);

/// Straight torus loop from `base` in the lattice class `winding`.
BrokenLoop torus_line(const Manifold& m, const GridPtr& grid, const Eigen::Vector2d& base, const Eigen::Vector2i& winding);

/// Orbit t -> R(axis, 2 pi n t / q) x of the rotation group through x. It closes
/// with period q and is invariant whenever 2 pi n q'/q equals the isometry angle mod 2 pi.
BrokenLoop rotation_orbit(const Manifold& m, const GridPtr& grid, const Eigen::Vector3d& axis, const Point& x, int n = 1);

/// Random nodewise tangent noise of the given size; the tied node is re-imposed
/// afterwards and a fixed-point base node (k' = 0) is left in place.
BrokenLoop perturb_loop(const Setting& s, const BrokenLoop& loop, double size, Rng& rng);

/// Loop with zeta(t + q') = I(zeta(t)) for all t, built from a random path on
/// [0, q'] (q' = q/2 and I^2 = id required). Used to sample the set where F^q and F^{q'} agree.
BrokenLoop random_symmetric_loop(const Setting& s, const GridPtr& grid, double step, Rng& rng);

/// Random closed loop of small steps with the invariance tie imposed.
BrokenLoop random_loop(const Setting& s, const GridPtr& grid, double step, Rng& rng);

}  // namespace geolab
