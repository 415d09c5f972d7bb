#include "geolab/homotopy.hpp"

#include "geolab/chain.hpp"
#include "geolab/error.hpp"
#include "geolab/morse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace geolab {

// ----------------------------------------------------------------- simplices

namespace {

Barycentric drop_entry(const Barycentric& b, int l) {
  Barycentric out(b.size() - 1);
  for (int i = 0, j = 0; i < b.size(); ++i) {
    if (i != l) out[j++] = b[i];
  }
  return out;
}

std::vector<BrokenLoop> drop_vertex(const std::vector<BrokenLoop>& v, int l) {
  std::vector<BrokenLoop> out;
  for (int i = 0; i < static_cast<int>(v.size()); ++i) {
    if (i != l) out.push_back(v[static_cast<std::size_t>(i)]);
  }
  return out;
}

void compositions(int parts, int total, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int a = total; a >= 0; --a) {
    cur.push_back(a);
    compositions(parts - 1, total - a, cur, out);
    cur.pop_back();
  }
}

}  // namespace

Barycentric face_map(const Barycentric& b, int l) {
  Barycentric out(b.size() + 1);
  for (int i = 0, j = 0; i < out.size(); ++i) out[i] = i == l ? 0.0 : b[j++];
  return out;
}

std::vector<Barycentric> barycentric_grid(int dim, int density) {
  if (dim < 0 || density < 1) throw Error(ErrorCode::PreViolation, "simplex grid needs dim >= 0 and density >= 1");
  std::vector<std::vector<int>> comps;
  std::vector<int> cur;
  compositions(dim + 1, density, cur, comps);
  std::stable_sort(comps.begin(), comps.end(), [density](const auto& a, const auto& b) {
    const bool va = std::find(a.begin(), a.end(), density) != a.end();
    const bool vb = std::find(b.begin(), b.end(), density) != b.end();
    return va && !vb;
  });
  std::vector<Barycentric> out;
  for (const auto& c : comps) {
    Barycentric b(dim + 1);
    for (int i = 0; i <= dim; ++i) b[i] = static_cast<double>(c[static_cast<std::size_t>(i)]) / density;
    out.push_back(b);
  }
  return out;
}

BrokenLoop simplex_point(const Setting& s, const std::vector<BrokenLoop>& vertices, const Barycentric& b) {
  if (static_cast<int>(vertices.size()) != b.size()) {
    throw Error(ErrorCode::PreViolation, "barycentric point and vertex count differ");
  }
  const int d = static_cast<int>(b.size()) - 1;
  if (d == 0) return vertices.front();
  for (int l = 0; l <= d; ++l) {
    if (b[l] == 0.0) return simplex_point(s, drop_vertex(vertices, l), drop_entry(b, l));
  }
  // The line x + t (1,...,1) leaves the simplex through the face x_i = 0 of the
  // smallest coordinate (backwards) and through the face sum x = 1 (forwards).
  int imin = 1;
  for (int i = 2; i <= d; ++i) {
    if (b[i] < b[imin]) imin = i;
  }
  const double t_back = b[imin];
  const double t_fwd = b[0] / d;
  Barycentric alpha = b;
  Barycentric omega = b;
  for (int i = 1; i <= d; ++i) {
    alpha[i] -= t_back;
    omega[i] += t_fwd;
  }
  alpha[imin] = 0.0;
  alpha[0] = b[0] + d * t_back;
  omega[0] = 0.0;
  return interpolate_loops(s, simplex_point(s, vertices, alpha), simplex_point(s, vertices, omega),
                           t_back / (t_back + t_fwd));
}

LoopSimplex build_simplex(const Setting& s, const std::vector<BrokenLoop>& vertices, double delta, int density) {
  if (vertices.empty()) throw Error(ErrorCode::PreViolation, "a simplex needs at least one vertex");
  const Manifold& m = s.manifold;
  if (!(delta > 0.0) || delta > m.convexity_radius()) {
    throw Error(ErrorCode::RadiusTooLarge, "delta must lie in (0, R]");
  }
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices.size(); ++j) {
      if (!(dist_upsilon(m, vertices[i], vertices[j]) < delta)) {
        throw Error(ErrorCode::VerticesTooFar, "simplex vertices must be pairwise closer than delta");
      }
    }
  }
  LoopSimplex out;
  out.dim = static_cast<int>(vertices.size()) - 1;
  out.vertices = vertices;
  out.delta = delta;
  out.points = barycentric_grid(out.dim, density);
  for (const Barycentric& b : out.points) out.samples.push_back(simplex_point(s, vertices, b));
  return out;
}

double uniform_continuity_delta(const Setting& s, const std::vector<BrokenLoop>& loops, double eps, Rng& rng,
                                int trials) {
  if (loops.empty() || !(eps > 0.0)) throw Error(ErrorCode::PreViolation, "need loops and a positive epsilon");
  const Manifold& m = s.manifold;
  double delta = m.convexity_radius();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int halvings = 0; halvings < 40; ++halvings, delta *= 0.5) {
    bool ok = true;
    for (const BrokenLoop& z : loops) {
      const double fq = energy_Fq(m, z);
      const double fqp = energy_Fq_prime(m, z);
      for (int t = 0; t < trials && ok; ++t) {
        BrokenLoop w = z;
        const int kp = z.grid->k_prime;
        for (int i = 1; i <= z.k(); ++i) {
          if (i == kp || (i == z.k() && kp == 0 && !s.isometry.is_identity())) continue;
          w.at(i) = m.retract(z.at(i), m.random_tangent(z.at(i), 0.5 * delta * unit(rng), rng));
        }
        project_constraint(s, w, 0.0);
        if (!(dist_upsilon(m, z, w) < delta)) continue;
        ok = std::abs(energy_Fq(m, w) - fq) < eps && std::abs(energy_Fq_prime(m, w) - fqp) < eps;
      }
      if (!ok) break;
    }
    if (ok) return delta;
  }
  throw Error(ErrorCode::NoConvergence, "no admissible delta found");
}

// ------------------------------------------------------------------ families

LoopFamily interval_family(std::vector<BrokenLoop> loops, bool closed) {
  if (loops.size() < 2) throw Error(ErrorCode::PreViolation, "a family needs at least two samples");
  LoopFamily f;
  f.dim = 1;
  const std::size_t n = loops.size();
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd p(1);
    p[0] = static_cast<double>(i) / static_cast<double>(n - 1);
    f.params.push_back(p);
    f.boundary.push_back(!closed && (i == 0 || i + 1 == n));
  }
  f.curves = std::move(loops);
  return f;
}

IteratedLoop as_path(const BrokenLoop& loop) {
  IteratedLoop out{loop.grid->taus, {}};
  for (int i = 0; i <= loop.k(); ++i) out.nodes.push_back(loop.at(i));
  return out;
}

BrokenLoop from_path(const IteratedLoop& path, const GridPtr& grid) {
  if (path.nu != grid->taus) throw Error(ErrorCode::GridMismatch, "path times differ from the grid");
  BrokenLoop out{grid, {}};
  out.nodes.assign(path.nodes.begin() + 1, path.nodes.end());
  return out;
}

// ------------------------------------------------------------------- Bangert

namespace {

struct SweepEvaluator {
  const Manifold& m;
  const LoopFamily& fam;
  Setting id;

  SweepEvaluator(const Manifold& man, const LoopFamily& f) : m(man), fam(f), id{man, Isometry::identity()} {}

  double param(std::size_t i) const { return fam.params[i][0]; }

  /// theta_0(u), geodesically interpolated between neighbouring samples.
  BrokenLoop loop(double u) const {
    const std::size_t n = fam.size();
    if (u <= param(0)) return fam.curves.front();
    if (u >= param(n - 1)) return fam.curves.back();
    std::size_t i = 0;
    while (i + 2 < n && param(i + 1) <= u) ++i;
    const double t = (u - param(i)) / (param(i + 1) - param(i));
    return interpolate_loops(id, fam.curves[i], fam.curves[i + 1], t);
  }

  /// Base-point curve from b(a) to b(b) through the samples in between.
  std::vector<std::pair<double, Point>> connector(double a, double b, const Point& pa, const Point& pb) const {
    std::vector<std::pair<double, Point>> pts{{a, pa}};
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    std::vector<std::size_t> inner;
    for (std::size_t i = 0; i < fam.size(); ++i) {
      if (param(i) > lo && param(i) < hi) inner.push_back(i);
    }
    if (a > b) std::reverse(inner.begin(), inner.end());
    for (std::size_t i : inner) pts.emplace_back(param(i), fam.curves[i].at(0));
    pts.emplace_back(b, pb);
    return pts;
  }
};

/// Concatenates the copies theta_0(u_1), ..., theta_0(u_m) with base-point
/// connectors. Copies share the period left over by the connectors; a
/// connector of length l gets time q eps min(1, l / l0), so a vanishing
/// connector costs neither time nor energy.
IteratedLoop concatenate(const SweepEvaluator& ev, const std::vector<double>& u) {
  const Manifold& m = ev.m;
  const double q = ev.fam.curves.front().grid->q();
  const std::size_t mult = u.size();
  std::vector<BrokenLoop> copies;
  for (double v : u) copies.push_back(ev.loop(v));
  constexpr double kEps = 0.5;
  const double l0 = 0.1 * m.injrad();

  struct Conn {
    std::vector<std::pair<double, Point>> pts;
    double time = 0.0;
  };
  std::vector<Conn> conns(mult);
  double conn_total = 0.0;
  for (std::size_t j = 0; j < mult; ++j) {
    const std::size_t nxt = (j + 1) % mult;
    Conn c;
    if (u[j] != u[nxt]) {
      c.pts = ev.connector(u[j], u[nxt], copies[j].at(0), copies[nxt].at(0));
      double len = 0.0;
      for (std::size_t i = 0; i + 1 < c.pts.size(); ++i) len += m.dist(c.pts[i].second, c.pts[i + 1].second);
      c.time = len > 0.0 ? q * kEps * std::min(1.0, len / l0) : 0.0;
      if (c.time == 0.0) c.pts.clear();
    }
    conn_total += c.time;
    conns[j] = std::move(c);
  }
  const double copy_time = (static_cast<double>(mult) * q - conn_total) / static_cast<double>(mult);

  IteratedLoop out;
  out.nu.push_back(0.0);
  out.nodes.push_back(copies.front().at(0));
  double t0 = 0.0;
  for (std::size_t j = 0; j < mult; ++j) {
    const BrokenLoop& c = copies[j];
    const std::vector<double>& taus = c.grid->taus;
    for (int i = 1; i <= c.k(); ++i) {
      out.nu.push_back(t0 + taus[static_cast<std::size_t>(i)] * copy_time / q);
      out.nodes.push_back(c.at(i));
    }
    t0 += copy_time;
    const Conn& cn = conns[j];
    if (!cn.pts.empty()) {
      const double span = std::abs(cn.pts.back().first - cn.pts.front().first);
      for (std::size_t i = 1; i < cn.pts.size(); ++i) {
        out.nu.push_back(t0 + cn.time * std::abs(cn.pts[i].first - cn.pts.front().first) / span);
        out.nodes.push_back(cn.pts[i].second);
      }
      t0 += cn.time;
    }
  }
  // Closing node is the first one exactly.
  out.nodes.back() = out.nodes.front();
  return out;
}

void check_sweep(const LoopFamily& f) {
  if (f.dim != 1 || f.size() < 2) throw Error(ErrorCode::PreViolation, "Bangert homotopies need a one-parameter family");
  const GridPtr& g = f.curves.front().grid;
  for (const BrokenLoop& l : f.curves) {
    if (!(*l.grid == *g)) throw Error(ErrorCode::PeriodMismatch, "family loops must share one grid of period q");
  }
}

}  // namespace

IteratedLoop iterate_loop(const BrokenLoop& loop, int m) {
  if (m < 1) throw Error(ErrorCode::PreViolation, "iterate order must be at least 1");
  IteratedLoop out;
  out.nu.push_back(0.0);
  out.nodes.push_back(loop.at(0));
  const std::vector<double>& taus = loop.grid->taus;
  for (int j = 0; j < m; ++j) {
    for (int i = 1; i <= loop.k(); ++i) {
      out.nu.push_back(j * loop.grid->q() + taus[static_cast<std::size_t>(i)]);
      out.nodes.push_back(loop.at(i));
    }
  }
  return out;
}

BangertHomotopyResult bangert_homotopy(const Manifold& m, const LoopFamily& theta0, int mult, int x_per_slot,
                                       int s_samples) {
  check_sweep(theta0);
  if (mult < 1 || x_per_slot < 1 || s_samples < 2) throw Error(ErrorCode::PreViolation, "bad Bangert sampling");
  const SweepEvaluator ev(m, theta0);
  BangertHomotopyResult out;
  out.m = mult;
  for (int a = 0; a < s_samples; ++a) out.s_grid.push_back(static_cast<double>(a) / (s_samples - 1));
  const int nx = mult * x_per_slot;
  for (int b = 0; b <= nx; ++b) out.x_grid.push_back(static_cast<double>(b) / nx);

  for (std::size_t i = 0; i < theta0.size(); ++i) {
    if (theta0.boundary[i]) out.boundary_max = std::max(out.boundary_max, energy_Fq(m, theta0.curves[i]));
  }
  for (double s : out.s_grid) {
    std::vector<IteratedLoop> row;
    std::vector<double> yrow;
    for (double x : out.x_grid) {
      std::vector<double> u(static_cast<std::size_t>(mult));
      for (int j = 0; j < mult; ++j) {
        const double slot = std::clamp(mult * x - j, 0.0, 1.0);
        u[static_cast<std::size_t>(j)] = s == 0.0 ? x : (s == 1.0 ? slot : (1.0 - s) * x + s * slot);
      }
      row.push_back(concatenate(ev, u));
      yrow.push_back(u.front());
    }
    out.theta.push_back(std::move(row));
    out.y.push_back(std::move(yrow));
  }
  out.max_energy = -std::numeric_limits<double>::infinity();
  for (const IteratedLoop& c : out.theta1()) out.max_energy = std::max(out.max_energy, iterated_energy(m, c));
  out.delta = out.max_energy - out.boundary_max;
  return out;
}

BangertScan bangert_scan(const Manifold& m, const LoopFamily& theta0, const std::vector<int>& ms, int x_per_slot) {
  BangertScan out;
  out.ms = ms;
  double num = 0.0;
  double den = 0.0;
  bool positive = true;
  for (int mult : ms) {
    const double d = bangert_homotopy(m, theta0, mult, x_per_slot, 2).delta;
    out.deltas.push_back(d);
    num += d / mult;
    den += 1.0 / (static_cast<double>(mult) * mult);
    positive = positive && d > 0.0;
  }
  out.constant = den > 0.0 ? num / den : 0.0;
  out.exponent = std::numeric_limits<double>::quiet_NaN();
  if (positive && ms.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const double x = std::log(static_cast<double>(ms[i]));
      const double y = std::log(out.deltas[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    out.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return out;
}

// -------------------------------------------------------------------- escape

EscapeResult escape_negative_directions(const Setting& s, const PathFamily& family, const GeodesicRecord& record,
                                        const PeriodData& pd, Rng& rng, int s_samples) {
  const Manifold& m = s.manifold;
  const IteratedLoop center = iterate_embedding(record.loop, pd);
  const Chain chain = Chain::for_iterate(s, center);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(chain.hessian());
  const SpectrumReport spec = analyze_spectrum(chain.hessian());
  EscapeResult out;
  out.index = spec.index;
  if (family.dim >= spec.index) {
    throw Error(ErrorCode::IndexTooSmall, "family dimension must be below the index of the iterate");
  }
  out.level = iterated_energy(m, center);
  out.family = family;
  for (const IteratedLoop& c : family.curves) {
    if (c.nu != center.nu) throw Error(ErrorCode::GridMismatch, "family curves must share the iterate's time grid");
    out.max_before = std::max(out.max_before, iterated_energy(m, c));
  }
  out.max_after = out.max_before;
  if (out.max_before < out.level) return out;

  // Negative eigenvectors are the first `index` columns (ascending order).
  const Eigen::MatrixXd neg = eig.eigenvectors().leftCols(spec.index);
  const int n = chain.dimension();
  const int nvars = chain.var_count();

  auto to_coords = [&](const IteratedLoop& c) {
    Eigen::VectorXd x(n);
    for (int v = 0, off = 0; v < nvars; ++v) {
      const Frame& basis = chain.basis(v);
      x.segment(off, basis.cols()) = basis.transpose() * m.log(center.nodes[static_cast<std::size_t>(v)], c.nodes[static_cast<std::size_t>(v)]).components;
      off += static_cast<int>(basis.cols());
    }
    return x;
  };
  auto from_coords = [&](const Eigen::VectorXd& x) {
    IteratedLoop c{center.nu, {}};
    for (int v = 0, off = 0; v < nvars; ++v) {
      const Frame& basis = chain.basis(v);
      const Point& base = center.nodes[static_cast<std::size_t>(v)];
      c.nodes.push_back(m.exp(Tangent{base, Vec(basis * x.segment(off, basis.cols()))}));
      off += static_cast<int>(basis.cols());
    }
    c.nodes.push_back(s.isometry.apply(m, c.nodes.front()));
    return c;
  };

  // Random affine map of the parameters into the negative space, so that no
  // sample of a family of dimension d < index keeps a vanishing component.
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(spec.index, family.dim);
  Eigen::VectorXd b(spec.index);
  for (int i = 0; i < spec.index; ++i) {
    b[i] = normal(rng);
    for (int j = 0; j < family.dim; ++j) a(i, j) = normal(rng);
  }

  std::vector<Eigen::VectorXd> coords;
  for (const IteratedLoop& c : family.curves) coords.push_back(to_coords(c));

  double radius = 0.25 * m.convexity_radius();
  for (int attempt = 0; attempt < 8; ++attempt, radius *= 0.5) {
    EscapeResult trial = out;
    trial.radius = radius;
    trial.moved.clear();
    trial.energy_paths.clear();
    trial.monotone = true;
    trial.max_after = 0.0;
    const Eigen::VectorXd pert_scale = Eigen::VectorXd::Constant(1, 1e-3 * radius);
    for (std::size_t i = 0; i < family.size(); ++i) {
      const IteratedLoop& c = family.curves[i];
      const double e0 = iterated_energy(m, c);
      const Eigen::VectorXd& x = coords[i];
      const Eigen::VectorXd xneg = neg.transpose() * x;
      const double rest = (x - neg * xneg).norm();
      const double w = std::clamp(2.0 - rest / radius, 0.0, 1.0);
      if (family.boundary[i] || w == 0.0 || e0 < trial.level - 1e-12 * std::max(1.0, trial.level)) {
        trial.max_after = std::max(trial.max_after, e0);
        continue;
      }
      const Eigen::VectorXd u = xneg + pert_scale[0] * (a * family.params[i] + b);
      const Eigen::VectorXd target = std::max(0.5 * radius, xneg.norm()) * u.normalized();
      std::vector<double> path{e0};
      IteratedLoop moved = c;
      for (int k = 1; k < s_samples; ++k) {
        const double sk = static_cast<double>(k) / (s_samples - 1);
        const Eigen::VectorXd xs = x + neg * (sk * w * (target - xneg));
        moved = from_coords(xs);
        path.push_back(iterated_energy(m, moved));
        if (path.back() > path[path.size() - 2] + 1e-12 * std::max(1.0, trial.level)) trial.monotone = false;
      }
      trial.family.curves[i] = moved;
      trial.moved.push_back(static_cast<int>(i));
      trial.max_after = std::max(trial.max_after, path.back());
      trial.energy_paths.push_back(std::move(path));
    }
    trial.below_level = trial.max_after < trial.level;
    if (trial.monotone && trial.below_level) return trial;
    out = std::move(trial);
  }
  return out;
}

// ------------------------------------------------------------------- minimax

void MinimaxConfig::validate() const {
  if (max_rounds < 1 || stabilize_rounds < 1 || check_every < 1 || shorten_every < 1) {
    throw Error(ErrorCode::ConfigError, "minimax round counts must be positive");
  }
  if (!(stabilize_tol > 0.0) || !(band > 0.0) || !(critical_dist > 0.0)) {
    throw Error(ErrorCode::ConfigError, "minimax tolerances must be positive");
  }
}

namespace {

BrokenLoop shorten_in_place(const Setting& s, const BrokenLoop& loop) {
  ShortenResult r = shorten(s, loop, 1.0);
  if (*r.loop.grid == *loop.grid) r.loop.grid = loop.grid;
  return r.loop;
}

/// (mu + H_flat)^{-1} for closed loops under the identity, where H_flat is the
/// Hessian of F^q on flat space (a weighted cyclic Laplacian). Applied to the
/// gradient it gives the H^1 descent direction, whose step is well scaled
/// across all frequencies of the loop.
class SobolevPreconditioner {
 public:
  explicit SobolevPreconditioner(const TimeGrid& g) {
    const int k = g.k();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
    double wmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      // Segment i joins nodes i and i+1; variable j is node j+1.
      const double w = 1.0 / (g.q() * g.spacing(i));
      wmin = std::min(wmin, w);
      const int a = (i + k - 1) % k;
      const int b = i % k;
      h(a, a) += 2.0 * w;
      h(b, b) += 2.0 * w;
      h(a, b) -= 2.0 * w;
      h(b, a) -= 2.0 * w;
    }
    const double mu = 2.0 * wmin * (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / k));
    h.diagonal().array() += mu;
    solver_.compute(h);
  }

  Eigen::VectorXd direction(const Chain& c) const {
    const std::vector<Vec> g = c.variable_gradients();
    const int k = static_cast<int>(g.size());
    const int amb = static_cast<int>(g.front().size());
    Eigen::MatrixXd rhs(k, amb);
    for (int j = 0; j < k; ++j) rhs.row(j) = g[static_cast<std::size_t>(j)].transpose();
    const Eigen::MatrixXd d = solver_.solve(rhs);
    Eigen::VectorXd out(c.dimension());
    for (int j = 0, off = 0; j < k; ++j) {
      const Frame& b = c.basis(j);
      out.segment(off, b.cols()) = b.transpose() * d.row(j).transpose();
      off += static_cast<int>(b.cols());
    }
    return out;
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> solver_;
};

bool can_shorten(const Setting& s, const BrokenLoop& loop) {
  const TimeGrid& g = *loop.grid;
  return g.k() % 2 == 0 && g.k_prime % 2 == 0 && max_segment_length(s.manifold, loop) < s.manifold.injrad() / 3.0;
}

}  // namespace

MinimaxResult minimax(const Setting& s, LoopFamily family, const FlowConfig& flow, const MinimaxConfig& cfg) {
  flow.validate();
  cfg.validate();
  const Manifold& m = s.manifold;
  if (family.dim != 1 || family.size() < 3) throw Error(ErrorCode::PreViolation, "minimax needs a one-parameter family");
  const GridPtr grid = family.curves.front().grid;
  for (const BrokenLoop& l : family.curves) {
    if (!(*l.grid == *grid)) throw Error(ErrorCode::GridMismatch, "family loops must share one grid");
  }
  const bool closed = std::none_of(family.boundary.begin(), family.boundary.end(), [](bool b) { return b; });
  double min_spacing = grid->spacing(0);
  for (int i = 1; i < grid->k(); ++i) min_spacing = std::min(min_spacing, grid->spacing(i));
  // Closed loops under the identity use the H^1 direction with unit step;
  // otherwise plain gradient steps at the stable size for the stiffest mode.
  std::optional<SobolevPreconditioner> sobolev;
  if (s.isometry.is_identity() && grid->k_prime == 0) sobolev.emplace(*grid);
  double step = sobolev ? 1.0 : grid->q() * min_spacing / 8.0;
  const double max_step = step;

  MinimaxResult out;
  std::vector<double> energy(family.size());
  std::vector<bool> pinned(family.size(), false);  // samples replaced by a refined critical loop
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (!family.boundary[i] && can_shorten(s, family.curves[i])) family.curves[i] = shorten_in_place(s, family.curves[i]);
    energy[i] = energy_Fq(m, family.curves[i]);
  }

  auto neighbour_spacing = [&]() {
    std::vector<double> d;
    for (std::size_t i = 0; i + 1 < family.size(); ++i) d.push_back(dist_upsilon(m, family.curves[i], family.curves[i + 1]));
    std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
    return d[d.size() / 2];
  };
  const double ref_spacing = neighbour_spacing();

  auto insert_after = [&](std::size_t i) {
    const std::size_t j = closed ? (i + 1) % family.size() : i + 1;
    BrokenLoop mid = interpolate_loops(s, family.curves[i], family.curves[j], 0.5);
    Eigen::VectorXd p = 0.5 * (family.params[i] + (j == 0 ? Eigen::VectorXd::Ones(1) : family.params[j]));
    const auto pos = static_cast<long>(i + 1);
    energy.insert(energy.begin() + pos, energy_Fq(m, mid));
    pinned.insert(pinned.begin() + pos, false);
    family.params.insert(family.params.begin() + pos, p);
    family.boundary.insert(family.boundary.begin() + pos, false);
    family.curves.insert(family.curves.begin() + pos, std::move(mid));
  };

  int stable_since = 0;
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    out.rounds = round;
    const double level = *std::max_element(energy.begin(), energy.end());
    const double band = cfg.band * std::max(std::abs(level), 1e-12);

    // Descent with a cutoff that ramps from 0 at level - 2 band to 1 at level - band.
    bool rejected = false;
    for (std::size_t i = 0; i < family.size(); ++i) {
      if (family.boundary[i] || pinned[i]) continue;
      const double w = std::clamp((energy[i] - (level - 2.0 * band)) / band, 0.0, 1.0);
      if (w == 0.0) continue;
      Chain c = Chain::for_loop(s, family.curves[i]);
      const Eigen::VectorXd grad = c.gradient();
      if (grad.norm() < flow.grad_tol) continue;
      const Eigen::VectorXd g = sobolev ? sobolev->direction(c) : grad;
      const auto [e_new, longest] = c.energy_and_max_segment(-step * w * g);
      if (e_new > energy[i] || longest >= m.injrad()) {
        rejected = true;
        continue;
      }
      c.move(-step * w * g);
      BrokenLoop next = c.loop();
      if (round % cfg.shorten_every == 0 && can_shorten(s, next)) next = shorten_in_place(s, next);
      family.curves[i] = std::move(next);
      energy[i] = energy_Fq(m, family.curves[i]);
    }
    step = rejected ? 0.5 * step : std::min(max_step, 1.25 * step);

    // Refine the sampling where the maximum sits between widely spaced samples.
    if (family.size() < cfg.max_samples) {
      const std::size_t a = static_cast<std::size_t>(std::max_element(energy.begin(), energy.end()) - energy.begin());
      const bool has_next = closed || a + 1 < family.size();
      if (has_next && dist_upsilon(m, family.curves[a], family.curves[closed ? (a + 1) % family.size() : a + 1]) >
                          2.0 * ref_spacing) {
        insert_after(a);
      }
      if ((closed || a > 0) && family.size() < cfg.max_samples) {
        const std::size_t prev = a == 0 ? family.size() - 1 : a - 1;
        if (dist_upsilon(m, family.curves[prev], family.curves[a]) > 2.0 * ref_spacing) insert_after(prev);
      }
    }

    const double now = *std::max_element(energy.begin(), energy.end());
    out.max_trace.push_back(now);
    const std::size_t t = out.max_trace.size();
    if (t > static_cast<std::size_t>(cfg.stabilize_rounds)) {
      const auto first = out.max_trace.end() - cfg.stabilize_rounds - 1;
      const auto [lo, hi] = std::minmax_element(first, out.max_trace.end());
      stable_since = *hi - *lo < cfg.stabilize_tol * std::max(1.0, std::abs(now)) ? stable_since + 1 : 0;
    }

    if (round % cfg.check_every != 0) continue;
    const std::size_t a = static_cast<std::size_t>(std::max_element(energy.begin(), energy.end()) - energy.begin());
    if (pinned[a]) {
      if (stable_since > 0) {
        out.converged = true;
        break;
      }
      continue;
    }
    try {
      RefineResult r = refine_critical(s, family.curves[a], flow);
      const double d = dist_upsilon(m, family.curves[a], r.record.loop);
      if (r.record.kind == RecordKind::Geodesic && d < 2.0 * ref_spacing && r.record.energy <= now + band) {
        if (r.record.index > family.dim && s.isometry.is_identity() && grid->k_prime == 0 &&
            std::abs(grid->q() - std::round(grid->q())) < 1e-12) {
          // Above a critical point of index > 1 the family can be pushed down.
          PathFamily paths{family.dim, family.params, {}, family.boundary};
          for (const BrokenLoop& l : family.curves) paths.curves.push_back(as_path(l));
          const auto qq = static_cast<long long>(std::llround(grid->q()));
          PeriodData pd{Rational(qq), Rational(qq), Rational(0), 0};
          Rng rng(static_cast<Rng::result_type>(round));
          EscapeResult esc = escape_negative_directions(s, paths, r.record, pd, rng);
          for (std::size_t i = 0; i < family.size(); ++i) {
            family.curves[i] = from_path(esc.family.curves[i], grid);
            energy[i] = energy_Fq(m, family.curves[i]);
          }
          ++out.escapes;
          continue;
        }
        // The sample climbs onto the critical loop next to it.
        family.curves[a] = r.record.loop;
        energy[a] = r.record.energy;
        pinned[a] = true;
        out.record = r.record;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NewtonStall) throw;
    }
  }

  out.c = *std::max_element(energy.begin(), energy.end());
  out.family_min = *std::min_element(energy.begin(), energy.end());
  out.family = std::move(family);
  if (!out.converged) out.flag = ErrorCode::NoConvergence;
  return out;
}

}  // namespace geolab
