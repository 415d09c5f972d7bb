#pragma once

#include "geolab/isometry.hpp"
#include "geolab/manifold.hpp"

#include <boost/rational.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace geolab {

/// The manifold together with the isometry the loops are invariant under.
struct Setting {
  Manifold manifold;
  Isometry isometry;
};

/// Time grid 0 = tau_0 < ... < tau_k = q with a marked index k' (tau_{k'} = q').
struct TimeGrid {
  std::vector<double> taus;
  int k_prime = 0;

  int k() const { return static_cast<int>(taus.size()) - 1; }
  double q() const { return taus.back(); }
  double q_prime() const { return taus[static_cast<std::size_t>(k_prime)]; }
  double spacing(int i) const { return taus[static_cast<std::size_t>(i) + 1] - taus[static_cast<std::size_t>(i)]; }
  double max_spacing() const;

  /// Upper bound injrad^2 / (9 q b) on the grid spacing for energy bound b.
  static double spacing_limit(double injrad, double q, double energy_bound);
  bool satisfies_spacing_bound(double injrad, double energy_bound) const;

  static TimeGrid uniform(int k, double q);
  /// Uniform on [0, q'] and on [q', q], with the node k' pinned at q'.
  static TimeGrid pinned(int k, double q, double q_prime);
  /// Smallest even k whose pinned grid meets the spacing bound with 20% margin.
  static TimeGrid automatic(double q, double q_prime, double injrad, double energy_bound);

  void validate() const;
  bool operator==(const TimeGrid&) const = default;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

GridPtr make_grid(TimeGrid grid);

/// Element of the broken-geodesic space: nodes[i-1] = zeta(tau_i) for
/// i = 1..k. zeta(tau_0) is identified with zeta(tau_k) by closure.
struct BrokenLoop {
  GridPtr grid;
  std::vector<Point> nodes;

  int k() const { return grid->k(); }
  /// zeta(tau_i) for i in 0..k.
  const Point& at(int i) const { return nodes[static_cast<std::size_t>(i == 0 ? k() : i) - 1]; }
  Point& at(int i) { return nodes[static_cast<std::size_t>(i == 0 ? k() : i) - 1]; }
};

double energy_Fq(const Manifold& m, const BrokenLoop& loop);
double energy_Fq_prime(const Manifold& m, const BrokenLoop& loop);
/// integral of |zeta'|^2 over [tau_i, tau_{i+1}] for each i.
std::vector<double> interval_energies(const Manifold& m, const BrokenLoop& loop);
double max_segment_length(const Manifold& m, const BrokenLoop& loop);

/// dist(I(zeta(0)), zeta(tau_{k'})).
double constraint_residual(const Setting& s, const BrokenLoop& loop);
/// Re-imposes zeta(tau_{k'}) = I(zeta(0)) (k' > 0) when the residual exceeds tol.
void project_constraint(const Setting& s, BrokenLoop& loop, double tol = 1e-9);
/// Throws PRE_VIOLATION unless closure, invariance and segment length hold.
void validate_loop(const Setting& s, const BrokenLoop& loop, double tol = 1e-9);

double dist_upsilon(const Manifold& m, const BrokenLoop& a, const BrokenLoop& b);
bool in_polydisc(const Manifold& m, const BrokenLoop& center, double r, const BrokenLoop& candidate);
/// Nodewise shortest-geodesic interpolation between two loops on one grid.
BrokenLoop interpolate_loops(const Setting& s, const BrokenLoop& a, const BrokenLoop& b, double t);

/// The broken curve evaluated at an arbitrary time, extended q-periodically.
Point loop_at_time(const Manifold& m, const BrokenLoop& loop, double t);
/// Loop t -> zeta(t + shift) sampled on the same grid.
BrokenLoop time_shift(const Manifold& m, const BrokenLoop& loop, double shift);

using Rational = boost::rational<long long>;

double to_double(const Rational& r);
/// r mod q in [0, q).
Rational rational_mod(const Rational& r, const Rational& q);
Rational parse_rational(const std::string& text);

/// Period bookkeeping for iterates: minimal period p, basic period q (a
/// multiple of p), residue class q' in [0, q) and iterate order m.
struct PeriodData {
  Rational p{1};
  Rational q{1};
  Rational q_prime{0};
  long long m = 0;

  Rational iterate_period() const { return Rational(m) * p + Rational(1); }
  /// Throws NOT_MULTIPLE or INCONSISTENT_PERIODS.
  void validate() const;
  /// PeriodData for order m with q' derived from the congruence.
  static PeriodData for_order(Rational p, Rational q, long long m);
};

/// Residue classes q' of mp+1 mod q for every m in [m_lo, m_hi].
std::map<Rational, std::vector<long long>> residue_partition(const Rational& p, const Rational& q, long long m_lo,
                                                             long long m_hi);

/// Broken invariant curve on [0, mp+1] over the extended times nu_0..nu_{j'};
/// the last node equals I(first node) by construction.
struct IteratedLoop {
  std::vector<double> nu;
  std::vector<Point> nodes;

  double period() const { return nu.back(); }
  int segment_count() const { return static_cast<int>(nodes.size()) - 1; }
};

IteratedLoop iterate_embedding(const BrokenLoop& loop, const PeriodData& pd);
/// E^{mp+1} of the iterated curve by direct segment summation.
double iterated_energy(const Manifold& m, const IteratedLoop& it);

struct EnergyIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

EnergyIdentity iterated_energy_identity_check(const Manifold& m, const BrokenLoop& loop, const PeriodData& pd);

/// Dense samples of the geometric image, used to tell invariant geodesics apart.
struct ImageSignature {
  std::vector<Point> samples;
  double length = 0.0;
};

ImageSignature image_signature(const Manifold& m, const BrokenLoop& loop, int per_segment = 4);
/// Symmetric Hausdorff distance between two images, from each sample to the other sampled curve.
double image_distance(const Manifold& m, const ImageSignature& a, const ImageSignature& b);

enum class RecordKind { Constant, Kinked, Geodesic };

std::string_view to_string(RecordKind kind);

/// Converged critical point of F^q on the broken-geodesic space.
struct GeodesicRecord {
  BrokenLoop loop;
  double energy = 0.0;
  double grad_norm = 0.0;
  int index = 0;
  int nullity = 0;
  /// Relative velocity mismatch |dI v(0) - v(q')| / speed together with the
  /// velocity jumps at the two tied nodes. A critical point of the constrained
  /// problem only balances these jumps against each other, so a nonzero value
  /// marks a kinked critical point that is not an invariant geodesic.
  double kink_defect = 0.0;
  /// Relative spread of the segment speeds dist/dtau.
  double speed_defect = 0.0;
  RecordKind kind = RecordKind::Geodesic;
  ImageSignature image_signature;
};

/// Integer winding vector of a loop on the flat torus (lattice coordinates).
Eigen::Vector2i torus_winding(const Manifold& m, const BrokenLoop& loop);

}  // namespace geolab
