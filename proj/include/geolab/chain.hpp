#pragma once

#include "geolab/loopspace.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace geolab {

/// A discrete energy sum_j w_j dist(z_j, z_{j+1})^2 over a chain of points
/// z_0..z_N, where every z_j is one of the free variables, possibly mapped
/// through the isometry. Variables are moved in local coordinates
/// x_v(c) = retract(x_v, B_v c_v) with orthonormal tangent bases B_v, which
/// keeps both the closure and the invariance ties exact.
class Chain {
 public:
  struct Node {
    int var = 0;
    bool mapped = false;  // z_j = I(x_var)
  };

  /// F^q on the broken-geodesic space: p_{k'} = I(p_k) is eliminated, and for
  /// k' = 0 the node p_k is confined to fix(I).
  static Chain for_loop(const Setting& s, const BrokenLoop& loop);
  /// E^{mp+1} on invariant broken paths: the last node is tied to I(first).
  static Chain for_iterate(const Setting& s, const IteratedLoop& it);

  const Setting& setting() const { return setting_; }
  int var_count() const { return static_cast<int>(vars_.size()); }
  int dimension() const { return offsets_.back(); }
  const std::vector<Point>& vars() const { return vars_; }
  const Frame& basis(int v) const { return bases_[static_cast<std::size_t>(v)]; }

  double energy() const { return energy_of(vars_); }
  double energy_at(const Eigen::VectorXd& c) const { return energy_of(displaced(c)); }
  /// Energy and longest segment of the displaced chain in one pass.
  std::pair<double, double> energy_and_max_segment(const Eigen::VectorXd& c) const;
  /// Coordinate gradient at the current variables.
  Eigen::VectorXd gradient() const;
  /// Gradient of c -> energy(x(c)), pulled back through the retraction.
  Eigen::VectorXd gradient_at(const Eigen::VectorXd& c) const;
  /// Riemannian gradient per variable, tangent at x_v (inside T fix(I) where confined).
  std::vector<Vec> variable_gradients() const;
  /// Symmetrised central differences of the analytic coordinate gradient.
  Eigen::MatrixXd hessian(double h = 1e-5) const;

  std::vector<Point> displaced(const Eigen::VectorXd& c) const;
  void move(const Eigen::VectorXd& c);
  void set_vars(std::vector<Point> vars);

  std::vector<Point> chain_points(const std::vector<Point>& vars) const;
  /// Rebuilds the loop (for_loop chains only).
  BrokenLoop loop() const;
  IteratedLoop iterate() const;

 private:
  Chain(Setting s) : setting_(std::move(s)) {}
  double energy_of(const std::vector<Point>& vars) const;
  std::vector<Vec> raw_gradients(const std::vector<Point>& vars) const;
  void rebuild_bases();

  Setting setting_;
  std::vector<Node> nodes_;
  std::vector<double> weights_;
  std::vector<Point> vars_;
  std::vector<bool> confined_;
  std::vector<Frame> bases_;
  std::vector<int> offsets_{0};
  GridPtr grid_;
  std::vector<double> nu_;
  std::vector<int> loop_node_of_var_;  // for_loop: node index i (1..k) of each variable
};

}  // namespace geolab
