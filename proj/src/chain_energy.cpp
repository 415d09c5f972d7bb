#include "geolab/chain.hpp"

#include "geolab/error.hpp"

#include <algorithm>

namespace geolab {

Chain Chain::for_loop(const Setting& s, const BrokenLoop& loop) {
  Chain c(s);
  const TimeGrid& g = *loop.grid;
  const int k = g.k();
  const int kp = g.k_prime;
  c.grid_ = loop.grid;
  std::vector<int> var_of(static_cast<std::size_t>(k) + 1, -1);
  for (int i = 1; i <= k; ++i) {
    if (kp > 0 && i == kp) continue;
    var_of[static_cast<std::size_t>(i)] = static_cast<int>(c.vars_.size());
    c.vars_.push_back(loop.at(i));
    c.loop_node_of_var_.push_back(i);
    c.confined_.push_back(i == k && kp == 0 && !s.isometry.is_identity());
  }
  const int last = var_of[static_cast<std::size_t>(k)];
  for (int i = 0; i <= k; ++i) {
    if (i == 0 || i == k) {
      c.nodes_.push_back({last, false});
    } else if (i == kp) {
      c.nodes_.push_back({last, true});
    } else {
      c.nodes_.push_back({var_of[static_cast<std::size_t>(i)], false});
    }
  }
  for (int i = 0; i < k; ++i) c.weights_.push_back(1.0 / (g.q() * g.spacing(i)));
  c.rebuild_bases();
  return c;
}

Chain Chain::for_iterate(const Setting& s, const IteratedLoop& it) {
  Chain c(s);
  const int n = it.segment_count();
  if (n < 2) throw Error(ErrorCode::PreViolation, "iterated path needs at least two segments");
  c.nu_ = it.nu;
  for (int j = 0; j < n; ++j) {
    c.vars_.push_back(it.nodes[static_cast<std::size_t>(j)]);
    c.confined_.push_back(false);
    c.nodes_.push_back({j, false});
  }
  c.nodes_.push_back({0, true});
  const double total = it.period();
  for (int j = 0; j < n; ++j) {
    c.weights_.push_back(1.0 / (total * (it.nu[static_cast<std::size_t>(j) + 1] - it.nu[static_cast<std::size_t>(j)])));
  }
  c.rebuild_bases();
  return c;
}

void Chain::rebuild_bases() {
  const Manifold& m = setting_.manifold;
  bases_.clear();
  offsets_.assign(1, 0);
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    bases_.push_back(confined_[v] ? setting_.isometry.fixed_tangent_basis(m, vars_[v]) : m.tangent_basis(vars_[v]));
    offsets_.push_back(offsets_.back() + static_cast<int>(bases_.back().cols()));
  }
}

std::vector<Point> Chain::chain_points(const std::vector<Point>& vars) const {
  std::vector<Point> z;
  z.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    const Point& x = vars[static_cast<std::size_t>(n.var)];
    z.push_back(n.mapped ? setting_.isometry.apply(setting_.manifold, x) : x);
  }
  return z;
}

double Chain::energy_of(const std::vector<Point>& vars) const {
  const std::vector<Point> z = chain_points(vars);
  long double sum = 0.0L;
  for (std::size_t j = 0; j + 1 < z.size(); ++j) {
    const long double d = setting_.manifold.dist(z[j], z[j + 1]);
    sum += weights_[j] * d * d;
  }
  return static_cast<double>(sum);
}

std::pair<double, double> Chain::energy_and_max_segment(const Eigen::VectorXd& c) const {
  const std::vector<Point> z = chain_points(displaced(c));
  long double sum = 0.0L;
  double longest = 0.0;
  for (std::size_t j = 0; j + 1 < z.size(); ++j) {
    const double d = setting_.manifold.dist(z[j], z[j + 1]);
    longest = std::max(longest, d);
    sum += weights_[j] * static_cast<long double>(d) * d;
  }
  return {static_cast<double>(sum), longest};
}

std::vector<Vec> Chain::raw_gradients(const std::vector<Point>& vars) const {
  const Manifold& m = setting_.manifold;
  const Isometry inv = setting_.isometry.inverse();
  const std::vector<Point> z = chain_points(vars);
  std::vector<Vec> out(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) out[v] = Vec::Zero(m.ambient_dimension());
  for (std::size_t j = 0; j < z.size(); ++j) {
    Vec g = Vec::Zero(m.ambient_dimension());
    if (j > 0) g -= 2.0 * weights_[j - 1] * m.log(z[j], z[j - 1]).components;
    if (j + 1 < z.size()) g -= 2.0 * weights_[j] * m.log(z[j], z[j + 1]).components;
    const Node& n = nodes_[j];
    // The adjoint of dI is dI^{-1} since I is an isometry.
    out[static_cast<std::size_t>(n.var)] += n.mapped ? inv.differential(m, z[j], g) : g;
  }
  return out;
}

std::vector<Point> Chain::displaced(const Eigen::VectorXd& c) const {
  std::vector<Point> out = vars_;
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    const int off = offsets_[v];
    const int n = offsets_[v + 1] - off;
    if (n == 0) continue;
    const Eigen::VectorXd cv = c.segment(off, n);
    if (cv.squaredNorm() == 0.0) continue;
    out[v] = setting_.manifold.retract(vars_[v], Vec(bases_[v] * cv));
  }
  return out;
}

Eigen::VectorXd Chain::gradient() const {
  const std::vector<Vec> g = raw_gradients(vars_);
  Eigen::VectorXd out(dimension());
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    out.segment(offsets_[v], offsets_[v + 1] - offsets_[v]) = bases_[v].transpose() * g[v];
  }
  return out;
}

Eigen::VectorXd Chain::gradient_at(const Eigen::VectorXd& c) const {
  const std::vector<Point> y = displaced(c);
  const std::vector<Vec> g = raw_gradients(y);
  Eigen::VectorXd out(dimension());
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    const int off = offsets_[v];
    const int n = offsets_[v + 1] - off;
    if (n == 0) continue;
    const Frame jac = setting_.manifold.retract_differential(vars_[v], Vec(bases_[v] * c.segment(off, n)), bases_[v]);
    out.segment(off, n) = jac.transpose() * g[v];
  }
  return out;
}

std::vector<Vec> Chain::variable_gradients() const {
  std::vector<Vec> g = raw_gradients(vars_);
  for (std::size_t v = 0; v < g.size(); ++v) g[v] = bases_[v] * (bases_[v].transpose() * g[v]);
  return g;
}

Eigen::MatrixXd Chain::hessian(double h) const {
  const int n = dimension();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    c[j] = h;
    const Eigen::VectorXd plus = gradient_at(c);
    c[j] = -h;
    const Eigen::VectorXd minus = gradient_at(c);
    c[j] = 0.0;
    hess.col(j) = (plus - minus) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

void Chain::move(const Eigen::VectorXd& c) {
  vars_ = displaced(c);
  rebuild_bases();
}

void Chain::set_vars(std::vector<Point> vars) {
  vars_ = std::move(vars);
  rebuild_bases();
}

BrokenLoop Chain::loop() const {
  if (!grid_) throw Error(ErrorCode::PreViolation, "chain does not represent a broken loop");
  const std::vector<Point> z = chain_points(vars_);
  BrokenLoop out{grid_, {}};
  out.nodes.assign(z.begin() + 1, z.end());
  return out;
}

IteratedLoop Chain::iterate() const {
  if (nu_.empty()) throw Error(ErrorCode::PreViolation, "chain does not represent an iterated path");
  return IteratedLoop{nu_, chain_points(vars_)};
}

}  // namespace geolab
