#pragma once

#include "geolab/config.hpp"
#include "geolab/homotopy.hpp"
#include "geolab/morse.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace geolab {

/// Process exit statuses shared by the CLI and the verification suite.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitAcceptance = 4 };

// ------------------------------------------------------------ start loops

/// Start loop number `index` of a multistart batch; every start draws from its
/// own generator seeded by (seed, index), so batches are order independent.
BrokenLoop find_start(const RunConfig& cfg, int index);

// ------------------------------------------------------------ families

/// Birkhoff sweep of the ellipsoid by parallel plane sections with the given
/// normal, from one point curve to the opposite one.
LoopFamily ellipsoid_sweep_family(const Manifold& m, const GridPtr& grid, int samples, const Eigen::Vector3d& tilt);
/// Translates of the straight torus loop in `winding`, closed up as a loop of loops.
LoopFamily torus_translates_family(const Manifold& m, const GridPtr& grid, int samples, const Eigen::Vector2i& winding);
/// Orbits of the rotation about the isometry axis (z for the identity), pole to pole.
LoopFamily latitude_sweep_family(const Setting& s, const GridPtr& grid, int samples);

/// Point curve, contractible circle of the given radius, point curve.
LoopFamily torus_circle_family(const Manifold& m, const GridPtr& grid, int samples, double radius);
/// Same on the sphere: circles of geodesic radius up to `radius` about the north pole.
LoopFamily sphere_latitude_family(const Manifold& m, const GridPtr& grid, int samples, double radius);
LoopFamily constant_family(const Manifold& m, const GridPtr& grid, int samples, const Point& x);

// ------------------------------------------------------------ find

struct FindBasin {
  GeodesicRecord record;
  int count = 0;
  std::vector<int> starts;
};

struct FindReport {
  /// Distinct geodesic images, in order of first discovery.
  std::vector<FindBasin> geodesics;
  /// Images grouped up to translations on the flat torus, where every closed
  /// geodesic of a winding class is a translate of one line. Elsewhere the
  /// classes are the images.
  std::vector<FindBasin> classes;
  std::vector<int> class_images;
  std::vector<FindBasin> constants;
  /// Every start that converged to a non-constant critical loop, in start order.
  std::vector<GeodesicRecord> converged;
  int kinked = 0;
  std::vector<std::string> failures;
  std::vector<std::vector<TrajectoryPoint>> trajectories;
};

/// Multistart search: optional descent, then refinement to a critical loop,
/// then deduplication of the images. Runs the starts on worker threads.
FindReport run_find(const RunConfig& cfg);

// ------------------------------------------------------------ commands

/// Each command writes <out>/<name>.json plus CSV tables and returns an ExitCode.
int cmd_find(const RunConfig& cfg, std::ostream& log);
int cmd_iterate(const RunConfig& cfg, std::ostream& log);
int cmd_minimax(const RunConfig& cfg, std::ostream& log);
int cmd_bangert(const RunConfig& cfg, std::ostream& log);

}  // namespace geolab
