#include "geolab/flows.hpp"

#include "geolab/error.hpp"
#include "geolab/morse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

namespace geolab {

void FlowConfig::validate() const {
  if (!(grad_tol > 0.0) || !(finite_diff_h > 0.0) || !(hessian_h > 0.0) || !(fixed_step > 0.0)) {
    throw Error(ErrorCode::ConfigError, "flow tolerances and steps must be positive");
  }
  if (max_iters < 1 || newton_iters < 1) throw Error(ErrorCode::ConfigError, "iteration caps must be at least 1");
  if (!(armijo > 0.0 && armijo < 1.0)) throw Error(ErrorCode::ConfigError, "armijo constant must lie in (0,1)");
}

std::vector<Vec> energy_gradient(const Setting& s, const BrokenLoop& loop) {
  const Chain chain = Chain::for_loop(s, loop);
  const std::vector<Vec> per_var = chain.variable_gradients();
  const int k = loop.k();
  const int kp = loop.grid->k_prime;
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(k));
  std::size_t v = 0;
  for (int i = 1; i <= k; ++i) {
    if (kp > 0 && i == kp) {
      out.emplace_back();  // filled below once p_k is known
      continue;
    }
    out.push_back(per_var[v++]);
  }
  if (kp > 0) {
    out[static_cast<std::size_t>(kp) - 1] = s.isometry.differential(s.manifold, loop.at(k), out.back());
  }
  return out;
}

double gradient_norm(const Setting& s, const BrokenLoop& loop) { return Chain::for_loop(s, loop).gradient().norm(); }

Eigen::VectorXd finite_difference_gradient(const Chain& chain, double h) {
  const int n = chain.dimension();
  Eigen::VectorXd out(n);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    c[j] = h;
    const double plus = chain.energy_at(c);
    c[j] = -h;
    const double minus = chain.energy_at(c);
    c[j] = 0.0;
    out[j] = (plus - minus) / (2.0 * h);
  }
  return out;
}

void write_trajectory_line(std::ostream& os, const TrajectoryPoint& pt) {
  os << std::setprecision(17) << "{\"iter\": " << pt.iter << ", \"energy\": " << pt.energy
     << ", \"grad_norm\": " << pt.grad_norm << "}\n";
}

// ------------------------------------------------------------------ descent

DescentResult descend(const Setting& s, const BrokenLoop& loop, const FlowConfig& cfg, const DescentObserver& observer) {
  cfg.validate();
  Chain chain = Chain::for_loop(s, loop);
  const double injrad = s.manifold.injrad();
  const TimeGrid& grid = *loop.grid;
  double min_spacing = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.k(); ++i) min_spacing = std::min(min_spacing, grid.spacing(i));
  // 1/L for the gradient of the chain energy, whose Lipschitz constant is at most 8 max w.
  const double lipschitz_step = grid.q() * min_spacing / 8.0;
  double step = cfg.step_rule == StepRule::Fixed ? cfg.fixed_step : lipschitz_step;

  DescentResult res;
  double energy = chain.energy();
  Eigen::VectorXd g = chain.gradient();
  res.trajectory.push_back({0, energy, g.norm()});
  if (observer) observer(chain.loop(), res.trajectory.back());

  int iter = 0;
  while (true) {
    if (g.norm() < cfg.grad_tol) {
      res.converged = true;
      break;
    }
    if (iter >= cfg.max_iters) {
      res.flag = ErrorCode::MaxItersExceeded;
      break;
    }
    const double g2 = g.squaredNorm();
    // Below this predicted decrease the energy comparison only sees rounding.
    const double noise = 1e-13 * std::max(1.0, std::abs(energy));
    double trial_energy = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      const bool unresolved = cfg.step_rule == StepRule::Backtracking && step * g2 < noise;
      // A step of at most 1/L still descends the exact energy there.
      if (unresolved) step = std::min(step, lipschitz_step);
      const auto [e, longest] = chain.energy_and_max_segment(-step * g);
      trial_energy = e;
      const bool admissible = longest < injrad;
      const bool decrease =
          unresolved || (cfg.step_rule == StepRule::Backtracking ? e <= energy - cfg.armijo * step * g2 : e <= energy);
      if (admissible && decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    // No decrease at machine precision: the iterate is as critical as this
    // arithmetic can resolve.
    if (!accepted) break;
    chain.move(-step * g);
    energy = trial_energy;
    g = chain.gradient();
    ++iter;
    res.trajectory.push_back({iter, energy, g.norm()});
    if (observer) observer(chain.loop(), res.trajectory.back());
    if (cfg.step_rule == StepRule::Backtracking) {
      step *= 2.0;
    } else {
      step = cfg.fixed_step;
    }
  }
  res.loop = chain.loop();
  res.steps = iter;
  res.energy = energy;
  res.grad_norm = g.norm();
  return res;
}

// ---------------------------------------------------------------- shortening

std::vector<double> coarse_interval_energies(const Manifold& m, const BrokenLoop& loop, const std::vector<double>& coarse) {
  const TimeGrid& g = *loop.grid;
  std::vector<double> out(coarse.size() - 1, 0.0);
  std::size_t c = 0;
  for (int i = 0; i < g.k(); ++i) {
    const double mid = 0.5 * (g.taus[static_cast<std::size_t>(i)] + g.taus[static_cast<std::size_t>(i) + 1]);
    while (c + 2 < coarse.size() && mid > coarse[c + 1]) ++c;
    const double d = m.dist(loop.at(i), loop.at(i + 1));
    out[c] += d * d / g.spacing(i);
  }
  return out;
}

ShortenResult shorten(const Setting& s, const BrokenLoop& loop, double t) {
  const Manifold& m = s.manifold;
  const TimeGrid& g = *loop.grid;
  if (t < 0.0 || t > 1.0) throw Error(ErrorCode::PreViolation, "shortening parameter must lie in [0,1]");
  if (g.k() % 2 != 0 || g.k_prime % 2 != 0) {
    throw Error(ErrorCode::PreViolation, "shortening needs a 2:1 refined grid (k and k' even)");
  }
  if (max_segment_length(m, loop) >= m.injrad() / 3.0) {
    throw Error(ErrorCode::SegmentTooLong, "segments must be shorter than injrad/3");
  }

  std::vector<double> coarse;
  for (int i = 0; i <= g.k(); i += 2) coarse.push_back(g.taus[static_cast<std::size_t>(i)]);

  // Old curve on the fine interval [tau_j, tau_{j+1}].
  auto old_at = [&](int j, double u) {
    return m.geodesic_between(loop.at(j), loop.at(j + 1),
                              std::clamp((u - g.taus[static_cast<std::size_t>(j)]) / g.spacing(j), 0.0, 1.0));
  };

  TimeGrid out_grid;
  out_grid.taus.push_back(0.0);
  std::vector<Point> nodes;
  const double tiny = 1e-12 * g.q();
  for (int c = 0; c + 1 < static_cast<int>(coarse.size()); ++c) {
    const int j0 = 2 * c;
    const double a = g.taus[static_cast<std::size_t>(j0)];
    const double mid = g.taus[static_cast<std::size_t>(j0) + 1];
    const double b = g.taus[static_cast<std::size_t>(j0) + 2];
    const double ts = a + t * (b - a);
    const Point& start = loop.at(j0);
    const Point end = ts <= mid ? old_at(j0, ts) : old_at(j0 + 1, ts);

    std::vector<double> times{mid, b};
    if (ts - a > tiny && b - ts > tiny && std::abs(ts - mid) > tiny) times.push_back(ts);
    std::sort(times.begin(), times.end());
    for (double u : times) {
      out_grid.taus.push_back(u);
      if (u == b) {
        nodes.push_back(loop.at(j0 + 2));
      } else if (u <= ts + tiny && ts - a > tiny) {
        nodes.push_back(m.geodesic_between(start, end, std::min(1.0, (u - a) / (ts - a))));
      } else {
        nodes.push_back(u < mid ? old_at(j0, u) : (u == mid ? loop.at(j0 + 1) : old_at(j0 + 1, u)));
      }
    }
    if (2 * c + 2 == g.k_prime) out_grid.k_prime = static_cast<int>(out_grid.taus.size()) - 1;
  }
  out_grid.taus.back() = g.q();
  // The coarse node values are untouched, so the closure and invariance ties carry over exactly.
  nodes.back() = loop.at(g.k());
  if (g.k_prime > 0) nodes[static_cast<std::size_t>(out_grid.k_prime) - 1] = loop.at(g.k_prime);

  ShortenResult res{BrokenLoop{make_grid(std::move(out_grid)), std::move(nodes)}, {}};
  res.interval_energies = coarse_interval_energies(m, res.loop, coarse);
  return res;
}

// ---------------------------------------------------------------- refinement

namespace {

double relative_speed_defect(const Manifold& m, const BrokenLoop& loop, double* mean_speed) {
  const TimeGrid& g = *loop.grid;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  double sum = 0.0;
  for (int i = 0; i < g.k(); ++i) {
    const double v = m.dist(loop.at(i), loop.at(i + 1)) / g.spacing(i);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  *mean_speed = sum / g.k();
  return *mean_speed > 0.0 ? (hi - lo) / *mean_speed : 0.0;
}

double relative_kink_defect(const Setting& s, const BrokenLoop& loop, double mean_speed) {
  if (!(mean_speed > 0.0)) return 0.0;
  const Manifold& m = s.manifold;
  const TimeGrid& g = *loop.grid;
  const int k = g.k();
  const int kp = g.k_prime;
  auto v_out = [&](int i) { return Vec(m.log(loop.at(i), loop.at(i + 1)).components / g.spacing(i)); };
  auto v_in = [&](int i) {
    const int prev = i == 0 ? k - 1 : i - 1;
    return Vec(-m.log(loop.at(i), loop.at(prev)).components / g.spacing(prev));
  };
  const Vec out0 = v_out(0);
  double defect = (out0 - v_in(0)).norm();
  defect = std::max(defect, (v_out(kp) - v_in(kp)).norm());
  defect = std::max(defect, (s.isometry.differential(m, loop.at(0), out0) - v_out(kp)).norm());
  return defect / mean_speed;
}

}  // namespace

GeodesicRecord make_record(const Setting& s, const BrokenLoop& loop, const FlowConfig& cfg) {
  const Manifold& m = s.manifold;
  GeodesicRecord rec;
  rec.loop = loop;
  const Chain chain = Chain::for_loop(s, loop);
  rec.energy = energy_Fq(m, loop);
  rec.grad_norm = chain.gradient().norm();
  const SpectrumReport spec = analyze_spectrum(chain.hessian(cfg.hessian_h));
  rec.index = spec.index;
  rec.nullity = spec.nullity;
  double mean_speed = 0.0;
  rec.speed_defect = relative_speed_defect(m, loop, &mean_speed);
  if (max_segment_length(m, loop) < 1e-9 * m.injrad()) {
    rec.kind = RecordKind::Constant;
  } else {
    rec.kink_defect = relative_kink_defect(s, loop, mean_speed);
    rec.kind = rec.kink_defect > 1e-3 ? RecordKind::Kinked : RecordKind::Geodesic;
  }
  rec.image_signature = image_signature(m, loop);
  return rec;
}

namespace {

/// Damped Newton on the residual of a chain energy, in place. Throws
/// NEWTON_STALL, leaving the chain at its best state so far.
/// `total` accumulates the accepted steps.
int solve_critical(Chain& chain, const FlowConfig& cfg, int& total) {
  const double injrad = chain.setting().manifold.injrad();
  const double step_tol = 1e-6 * injrad;
  Eigen::VectorXd g = chain.gradient();
  double damping = -1.0;
  int steps = 0;
  std::vector<double> history;
  for (;;) {
    history.push_back(g.norm());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(chain.hessian(cfg.hessian_h));
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const Eigen::MatrixXd& vecs = eig.eigenvectors();
    const double scale = lambda.cwiseAbs().maxCoeff();
    const Eigen::VectorXd gv = vecs.transpose() * g;
    // Pseudo-inverse Newton step; eigenvalues at the level of finite-difference
    // noise are treated as exact zeros.
    Eigen::VectorXd coeff = gv;
    for (int i = 0; i < coeff.size(); ++i) {
      coeff[i] = std::abs(lambda[i]) > 1e-13 * scale ? gv[i] / lambda[i] : 0.0;
    }
    Eigen::VectorXd newton = -(vecs * coeff);
    // On a degenerate critical manifold the residual shrinks much faster than the
    // distance, so the Newton step must be small as well.
    if (g.norm() < cfg.grad_tol && newton.cwiseAbs().maxCoeff() < step_tol) break;
    if (steps >= cfg.newton_iters) throw Error(ErrorCode::NewtonStall, "Newton iteration cap reached");
    const bool near = g.norm() < 1e-6 * std::max(1.0, scale);
    if (near && steps >= 20 && g.norm() > 0.5 * history[history.size() - 21]) {
      throw Error(ErrorCode::NewtonStall, "sublinear convergence near a degenerate critical point");
    }
    const auto capped = [&](Eigen::VectorXd d) {
      const double longest_move = d.cwiseAbs().maxCoeff();
      if (longest_move > 0.1 * injrad) d *= 0.1 * injrad / longest_move;
      return d;
    };
    bool accepted = false;
    if (near) {
      // Polishing: plain Newton steps, allowed to raise the residual a little
      // since the stiff directions recover quadratically.
      Chain trial = chain;
      trial.move(capped(newton));
      const Eigen::VectorXd gt = trial.gradient();
      if (gt.norm() < 3.0 * g.norm() + cfg.grad_tol) {
        chain = std::move(trial);
        g = gt;
        accepted = true;
      }
    }
    if (!accepted) {
      if (damping < 0.0) damping = 1e-6 * scale * scale;
      for (int tries = 0; tries < 40 && !accepted; ++tries) {
        // (H^2 + mu)^{-1} H g: Gauss-Newton on the residual g, which is a descent
        // direction for |g|^2 whatever the signature of H.
        Eigen::VectorXd c = gv;
        for (int i = 0; i < c.size(); ++i) c[i] *= lambda[i] / (lambda[i] * lambda[i] + damping);
        Chain trial = chain;
        trial.move(capped(-(vecs * c)));
        const Eigen::VectorXd gt = trial.gradient();
        if (gt.norm() < g.norm()) {
          chain = std::move(trial);
          g = gt;
          damping = std::max(damping / 8.0, 1e-14 * scale * scale);
          accepted = true;
        } else {
          damping *= 4.0;
        }
      }
    }
    if (!accepted) throw Error(ErrorCode::NewtonStall, "gradient residual cannot be reduced");
    ++steps;
    ++total;
  }
  return steps;
}

/// Critical points of F^q whose nullity exceeds the symmetry count converge
/// slowly in the loop space. The invariant path on [0, q'] with its end tied
/// to I(start) sees them as nondegenerate; solve there and extend the
/// resulting geodesic over [0, q].
BrokenLoop invariant_polish(const Setting& s, const BrokenLoop& loop, const FlowConfig& cfg, int& steps) {
  const Manifold& m = s.manifold;
  const TimeGrid& g = *loop.grid;
  const int kp = g.k_prime;
  IteratedLoop path;
  for (int i = 0; i <= kp; ++i) {
    path.nu.push_back(g.taus[static_cast<std::size_t>(i)]);
    path.nodes.push_back(loop.at(i));
  }
  Chain chain = Chain::for_iterate(s, path);
  solve_critical(chain, cfg, steps);
  const IteratedLoop done = chain.iterate();
  const Point& start = done.nodes.front();
  const Tangent v{start, m.log(start, done.nodes[1]).components / (done.nu[1] - done.nu[0])};
  BrokenLoop out{loop.grid, std::vector<Point>(static_cast<std::size_t>(g.k()))};
  for (int i = 1; i < g.k(); ++i) out.at(i) = m.exp(v, g.taus[static_cast<std::size_t>(i)]);
  out.at(g.k()) = start;
  out.at(kp) = s.isometry.apply(m, start);
  return out;
}

}  // namespace

RefineResult refine_critical(const Setting& s, const BrokenLoop& loop, const FlowConfig& cfg) {
  cfg.validate();
  Chain chain = Chain::for_loop(s, loop);
  int steps = 0;
  try {
    solve_critical(chain, cfg, steps);
    return {make_record(s, chain.loop(), cfg), steps};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NewtonStall || loop.grid->k_prime < 2) throw;
  }
  const BrokenLoop polished = invariant_polish(s, chain.loop(), cfg, steps);
  GeodesicRecord rec = make_record(s, polished, cfg);
  if (!(rec.grad_norm < cfg.grad_tol)) throw Error(ErrorCode::NewtonStall, "invariant geodesic does not close");
  return {std::move(rec), steps};
}

// ------------------------------------------------------------------- shells

ShellDiagnostics shell_diagnostics(const Setting& s, const GeodesicRecord& record, double rho1, double rho2,
                                   int n_samples, Rng& rng, ShellMode mode, int n_trajectories) {
  if (!(rho1 > 0.0 && rho1 < rho2 && rho2 <= s.manifold.convexity_radius())) {
    throw Error(ErrorCode::RadiusTooLarge, "shell radii must satisfy 0 < rho1 < rho2 <= R");
  }
  const Manifold& m = s.manifold;
  const Chain base = Chain::for_loop(s, record.loop);
  const int dim = base.dimension();

  Eigen::MatrixXd null_basis(dim, 0);
  if (mode != ShellMode::Full) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(base.hessian());
    const double tol = 1e-6 * eig.eigenvalues().cwiseAbs().maxCoeff();
    std::vector<int> cols;
    for (int i = 0; i < dim; ++i) {
      if (std::abs(eig.eigenvalues()[i]) <= tol) cols.push_back(i);
    }
    null_basis.resize(dim, static_cast<int>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) null_basis.col(static_cast<int>(c)) = eig.eigenvectors().col(cols[c]);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // A perturbation whose largest node displacement is roughly `radius`.
  auto perturbation = [&](double radius) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
    if (mode == ShellMode::NullSpace) {
      if (null_basis.cols() == 0) throw Error(ErrorCode::PreViolation, "record has no null directions");
      Eigen::VectorXd z(null_basis.cols());
      for (int i = 0; i < z.size(); ++i) z[i] = normal(rng);
      c = null_basis * z;
    } else {
      int off = 0;
      for (int v = 0; v < base.var_count(); ++v) {
        const int n = static_cast<int>(base.basis(v).cols());
        Eigen::VectorXd dir(n);
        for (int i = 0; i < n; ++i) dir[i] = normal(rng);
        if (n > 0) c.segment(off, n) = dir * (unit(rng) / std::max(dir.norm(), 1e-300));
        off += n;
      }
      if (mode == ShellMode::NormalSlice) c -= null_basis * (null_basis.transpose() * c);
    }
    double largest = 0.0;
    int off = 0;
    for (int v = 0; v < base.var_count(); ++v) {
      const int n = static_cast<int>(base.basis(v).cols());
      largest = std::max(largest, c.segment(off, n).norm());
      off += n;
    }
    return Eigen::VectorXd(c * (radius / std::max(largest, 1e-300)));
  };

  ShellDiagnostics out;
  out.rho1 = rho1;
  out.rho2 = rho2;
  out.mu = std::numeric_limits<double>::infinity();
  int attempts = 0;
  while (out.samples < n_samples && attempts < 50 * n_samples) {
    ++attempts;
    const double radius = rho1 + (rho2 - rho1) * unit(rng);
    Chain trial = base;
    trial.move(perturbation(radius));
    const double d = dist_upsilon(m, trial.loop(), record.loop);
    if (!(d > rho1 && d < rho2)) continue;
    ++out.samples;
    out.mu = std::min(out.mu, trial.gradient().norm());
  }
  if (out.samples == 0) throw Error(ErrorCode::PreViolation, "no shell samples were accepted");
  out.epsilon = (rho2 - rho1) * out.mu;
  if (out.mu < 1e-10) throw Error(ErrorCode::NonIsolatedSuspected, "gradient vanishes inside the shell");

  FlowConfig cfg;
  cfg.max_iters = 3000;
  out.min_crossing_drop = std::numeric_limits<double>::infinity();
  for (int tr = 0; tr < n_trajectories; ++tr) {
    Chain start = base;
    start.move(perturbation(0.5 * rho1));
    ++out.trajectories;
    double last_inside_energy = std::numeric_limits<double>::quiet_NaN();
    double drop = std::numeric_limits<double>::quiet_NaN();
    descend(s, start.loop(), cfg, [&](const BrokenLoop& l, const TrajectoryPoint& pt) {
      if (!std::isnan(drop)) return;
      const double d = dist_upsilon(m, l, record.loop);
      if (d < rho1) {
        last_inside_energy = pt.energy;
      } else if (d > rho2 && !std::isnan(last_inside_energy)) {
        drop = last_inside_energy - pt.energy;
      }
    });
    if (!std::isnan(drop)) {
      ++out.crossings;
      out.min_crossing_drop = std::min(out.min_crossing_drop, drop);
      if (drop < out.epsilon - 1e-6) out.drop_bound_holds = false;
    }
  }
  if (out.crossings == 0) out.min_crossing_drop = 0.0;
  return out;
}

}  // namespace geolab
