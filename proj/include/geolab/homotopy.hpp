#pragma once

#include "geolab/flows.hpp"
#include "geolab/loopspace.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace geolab {

// ----------------------------------------------------------------- simplices

/// Point of the standard simplex in barycentric coordinates b_0..b_d. The
/// affine coordinates of Delta^d are x_i = b_i for i >= 1.
using Barycentric = Eigen::VectorXd;

/// F_l: Delta^{d-1} -> l-th face of Delta^d (inserts b_l = 0).
Barycentric face_map(const Barycentric& b, int l);

/// All points with coordinates in (1/density) Z, vertices first.
std::vector<Barycentric> barycentric_grid(int dim, int density);

/// The simplex spanned by `vertices` at b. On the boundary it is the simplex
/// of the face; in the interior, the Upsilon-geodesic along the line of slope
/// (1,...,1) through b between its boundary points alpha(b) and omega(b).
BrokenLoop simplex_point(const Setting& s, const std::vector<BrokenLoop>& vertices, const Barycentric& b);

struct LoopSimplex {
  int dim = 0;
  std::vector<BrokenLoop> vertices;
  double delta = 0.0;
  std::vector<Barycentric> points;
  std::vector<BrokenLoop> samples;
};

/// Throws VERTICES_TOO_FAR unless the vertices are pairwise closer than delta,
/// RADIUS_TOO_LARGE if delta exceeds the convexity radius.
LoopSimplex build_simplex(const Setting& s, const std::vector<BrokenLoop>& vertices, double delta, int density);

/// Largest delta (halving from the convexity radius) for which random pairs
/// closer than delta around the given loops change F^q and F^{q'} by less than eps.
double uniform_continuity_delta(const Setting& s, const std::vector<BrokenLoop>& loops, double eps, Rng& rng,
                                int trials = 8);

// ------------------------------------------------------------------ families

template <class Curve>
struct Family {
  int dim = 1;
  std::vector<Eigen::VectorXd> params;
  std::vector<Curve> curves;
  std::vector<bool> boundary;

  std::size_t size() const { return curves.size(); }
};

using LoopFamily = Family<BrokenLoop>;
/// Families of curves on the iterate interval [0, T] (last node tied to I(first)).
using PathFamily = Family<IteratedLoop>;

/// One-parameter family at parameters i/(n-1); the end samples are the
/// boundary unless the family is a loop of loops.
LoopFamily interval_family(std::vector<BrokenLoop> loops, bool closed = false);

/// The loop as a path on [0, q]; needs the identity isometry.
IteratedLoop as_path(const BrokenLoop& loop);
BrokenLoop from_path(const IteratedLoop& path, const GridPtr& grid);

// ------------------------------------------------------------------- Bangert

struct BangertHomotopyResult {
  int m = 1;
  std::vector<double> s_grid;
  std::vector<double> x_grid;
  /// theta[a][b] = theta_{s_a}(x_b), a closed curve of period m q.
  std::vector<std::vector<IteratedLoop>> theta;
  /// Base-point reparametrisation: theta_s(x)(0) = theta_0(y_s(x))(0).
  std::vector<std::vector<double>> y;
  double boundary_max = 0.0;  // max over the boundary of E^q(theta_0)
  double max_energy = 0.0;    // max over x of E^{mq}(theta_1(x))
  double delta = 0.0;         // max_energy - boundary_max

  const std::vector<IteratedLoop>& theta1() const { return theta.back(); }
};

/// The m-fold iterate of a loop as a closed curve of period m q.
IteratedLoop iterate_loop(const BrokenLoop& loop, int m);

/// Pulls one loop at a time: on the slot [(j-1)/m, j/m] the j-th copy runs
/// through the family while the earlier copies sit at theta_0(1) and the later
/// ones at theta_0(0). Consecutive copies are joined along the base-point curve
/// of theta_0. Needs a one-parameter family of loops on one grid under the
/// identity; throws PERIOD_MISMATCH otherwise.
BangertHomotopyResult bangert_homotopy(const Manifold& m, const LoopFamily& theta0, int mult, int x_per_slot = 16,
                                       int s_samples = 5);

struct BangertScan {
  std::vector<int> ms;
  std::vector<double> deltas;
  /// Least-squares fit delta ~ C / m.
  double constant = 0.0;
  /// Slope of log delta against log m (NaN unless every delta is positive).
  double exponent = 0.0;
};

BangertScan bangert_scan(const Manifold& m, const LoopFamily& theta0, const std::vector<int>& ms, int x_per_slot = 16);

// -------------------------------------------------------------------- escape

struct EscapeResult {
  PathFamily family;
  double radius = 0.0;  // R; negative components are pushed to norm R/2
  double level = 0.0;   // energy of the critical iterate
  int index = 0;
  double max_before = 0.0;
  double max_after = 0.0;
  std::vector<int> moved;
  /// Energy of each moved sample along the s-grid.
  std::vector<std::vector<double>> energy_paths;
  bool monotone = true;
  bool below_level = true;
};

/// Pushes the family off the critical iterate along the negative eigenspace of
/// the discrete Hessian of E^{mp+1} at the iterate of `record`. Samples with
/// energy below the level, or outside the chart ball of radius 2R, are left
/// untouched. Throws INDEX_TOO_SMALL if the family dimension is not below the index.
EscapeResult escape_negative_directions(const Setting& s, const PathFamily& family, const GeodesicRecord& record,
                                        const PeriodData& pd, Rng& rng, int s_samples = 11);

// ------------------------------------------------------------------- minimax

struct MinimaxConfig {
  int max_rounds = 3000;
  double stabilize_tol = 1e-6;
  int stabilize_rounds = 50;
  /// Samples within `band` (relative) of the maximum are descended.
  double band = 0.02;
  int check_every = 10;
  double critical_dist = 1e-4;
  int shorten_every = 10;
  std::size_t max_samples = 512;

  void validate() const;
};

struct MinimaxResult {
  double c = 0.0;
  std::optional<GeodesicRecord> record;
  std::vector<double> max_trace;
  int rounds = 0;
  bool converged = false;
  std::optional<ErrorCode> flag;
  LoopFamily family;
  /// Smallest sampled energy in the final family.
  double family_min = 0.0;
  int escapes = 0;
};

/// Family descent towards inf max F^q over the deformation class of the family.
MinimaxResult minimax(const Setting& s, LoopFamily family, const FlowConfig& flow, const MinimaxConfig& cfg);

}  // namespace geolab
