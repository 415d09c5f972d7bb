#pragma once

#include "geolab/chain.hpp"
#include "geolab/error.hpp"
#include "geolab/loopspace.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

namespace geolab {

enum class StepRule { Fixed, Backtracking };

struct FlowConfig {
  StepRule step_rule = StepRule::Backtracking;
  double fixed_step = 1e-3;
  double armijo = 1e-4;
  double grad_tol = 1e-8;
  int max_iters = 20000;
  double finite_diff_h = 1e-6;
  double hessian_h = 1e-5;
  int newton_iters = 200;

  void validate() const;
};

/// Node-indexed gradient of F^q: entry i-1 is the tangent at zeta(tau_i).
/// The tied node p_{k'} carries dI of the gradient at p_k, so a step along the
/// field keeps I(zeta(0)) = zeta(tau_{k'}).
std::vector<Vec> energy_gradient(const Setting& s, const BrokenLoop& loop);
double gradient_norm(const Setting& s, const BrokenLoop& loop);
/// Central differences of the energy in the chain's local coordinates.
Eigen::VectorXd finite_difference_gradient(const Chain& chain, double h);

struct TrajectoryPoint {
  int iter = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
};

void write_trajectory_line(std::ostream& os, const TrajectoryPoint& pt);

struct DescentResult {
  BrokenLoop loop;
  std::vector<TrajectoryPoint> trajectory;
  int steps = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  /// MAX_ITERS_EXCEEDED when the iteration cap stopped the run.
  std::optional<ErrorCode> flag;
};

using DescentObserver = std::function<void(const BrokenLoop&, const TrajectoryPoint&)>;

/// Anti-gradient descent of F^q on the broken-geodesic space.
DescentResult descend(const Setting& s, const BrokenLoop& loop, const FlowConfig& cfg,
                      const DescentObserver& observer = {});

struct ShortenResult {
  BrokenLoop loop;
  /// Energy of each interval [nu_i, nu_{i+1}] of the coarse grid (every other node).
  std::vector<double> interval_energies;
};

/// Energy per coarse interval of a loop whose grid refines the coarse one 2:1.
std::vector<double> coarse_interval_energies(const Manifold& m, const BrokenLoop& loop, const std::vector<double>& coarse);

/// The shortening homotopy r_s with nodes nu_i = tau_{2i}: on each
/// [nu_i, (1-s) nu_i + s nu_{i+1}] the curve is replaced by the shortest
/// geodesic between its endpoints. The output grid is the input grid with the
/// break times added, so it represents zeta_s exactly.
ShortenResult shorten(const Setting& s, const BrokenLoop& loop, double t);

struct RefineResult {
  GeodesicRecord record;
  int newton_steps = 0;
};

/// Levenberg-Marquardt on the gradient residual (Newton with a pseudo-inverse
/// once the damping has died off), so saddles are reached as well as minima.
/// Throws NEWTON_STALL when the residual cannot be reduced further.
RefineResult refine_critical(const Setting& s, const BrokenLoop& loop, const FlowConfig& cfg);

/// Fills energy, gradient, spectrum, defects, kind and image of a record.
GeodesicRecord make_record(const Setting& s, const BrokenLoop& loop, const FlowConfig& cfg);

enum class ShellMode {
  Full,
  NormalSlice,  // perturbations orthogonal to the Hessian null space
  NullSpace,    // perturbations inside it, which exposes a degenerate critical set
};

struct ShellDiagnostics {
  double rho1 = 0.0;
  double rho2 = 0.0;
  double mu = 0.0;
  double epsilon = 0.0;
  int samples = 0;
  int trajectories = 0;
  int crossings = 0;
  /// Smallest energy drop between entering U(rho1) and leaving U(rho2), over crossing trajectories.
  double min_crossing_drop = 0.0;
  bool drop_bound_holds = true;
};

/// Sampling estimate of inf |grad| over the shell rho1 < dist_upsilon < rho2,
/// plus descent trajectories started inside U(rho1) to check the energy drop
/// (rho2 - rho1) mu on every crossing. Throws NONISOLATED_SUSPECTED if mu < 1e-10.
ShellDiagnostics shell_diagnostics(const Setting& s, const GeodesicRecord& record, double rho1, double rho2,
                                   int n_samples, Rng& rng, ShellMode mode = ShellMode::Full,
                                   int n_trajectories = 8);

}  // namespace geolab
