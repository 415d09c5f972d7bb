#include "geolab/acceptance.hpp"

#include "geolab/chain.hpp"
#include "geolab/commands.hpp"
#include "geolab/error.hpp"
#include "geolab/flows.hpp"
#include "geolab/homotopy.hpp"
#include "geolab/morse.hpp"
#include "geolab/starts.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace geolab {

namespace {

constexpr double kPi = std::numbers::pi;

struct Check {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

/// Order-two isometries for the symmetric-loop samples, one per catalog model.
std::vector<Setting> involutive_settings() {
  return {
      {Manifold::round_sphere(1.0), Isometry::rotation(Eigen::Vector3d::UnitZ(), kPi)},
      {Manifold::flat_torus(), Isometry::translation({0.5, 0.0})},
      {Manifold::ellipsoid(1.0, 1.1, 1.2), Isometry::rotation(Eigen::Vector3d::UnitZ(), kPi)},
      {Manifold::circle_times_sphere(2.0, 1.0), Isometry::product(1.0, Eigen::Vector3d::UnitZ(), kPi)},
  };
}

std::vector<Manifold> catalog() {
  Eigen::Matrix2d lattice;
  lattice << 1.0, 0.3, 0.0, 1.2;
  return {Manifold::round_sphere(1.0), Manifold::flat_torus(lattice), Manifold::ellipsoid(1.0, 1.1, 1.2),
          Manifold::circle_times_sphere(2.0, 1.0)};
}

// 1. The rotated round sphere carries a single invariant geodesic.
Check uniqueness_on_rotated_sphere(std::uint64_t seed) {
  const double alpha = 1.0;
  RunConfig cfg;
  cfg.seed = seed;
  cfg.setting = {Manifold::round_sphere(1.0), Isometry::rotation(Eigen::Vector3d::UnitZ(), alpha)};
  cfg.grid = make_grid(TimeGrid::pinned(32, 1.0, alpha / (2.0 * kPi)));
  cfg.find.starts = 64;
  cfg.find.start = "rotation_orbit";
  cfg.find.noise = 0.05;
  cfg.find.descend_first = false;
  const FindReport rep = run_find(cfg);

  const Manifold& m = cfg.setting.manifold;
  double worst = 0.0;
  for (const GeodesicRecord& r : rep.converged) {
    // Equator traversed with the same phase as the record: no R-action freedom left.
    Eigen::Vector3d x = r.loop.at(0).coords.head<3>();
    x.z() = 0.0;
    Vec z(3);
    z = x.normalized();
    const BrokenLoop equator = rotation_orbit(m, cfg.grid, Eigen::Vector3d::UnitZ(), m.make_point(z));
    worst = std::max(worst, dist_upsilon(m, r.loop, equator));
  }
  Check v;
  v.pass = rep.geodesics.size() == 1 && rep.failures.empty() && rep.kinked == 0 && !rep.converged.empty() &&
           worst < 1e-4;
  v.detail = std::to_string(rep.geodesics.size()) + " distinct geodesic image(s) from " +
             std::to_string(rep.converged.size()) + " converged starts (" + std::to_string(rep.constants.size()) +
             " constant classes, " + std::to_string(rep.kinked) + " kinked, " + std::to_string(rep.failures.size()) +
             " failed); max dist to equator " + fmt(worst, 3);
  if (!rep.geodesics.empty()) v.detail += "; energy " + fmt(rep.geodesics.front().record.energy, 10);
  return v;
}

// 2. E^{mp+1} of the iterate equals F^q + q'/(mp+1) (F^{q'} - F^q).
Check energy_identity(std::uint64_t seed) {
  Rng rng(seed);
  const auto sym = involutive_settings();
  const auto cat = catalog();
  const GridPtr full = make_grid(TimeGrid::uniform(16, 1.0));
  const GridPtr half = make_grid(TimeGrid::pinned(16, 1.0, 0.5));
  std::uniform_int_distribution<int> pick(0, 3);
  double worst = 0.0;
  const int cases = 1000;
  for (int i = 0; i < cases; ++i) {
    const int model = i % 4;
    const bool halved = (i / 4) % 2 == 1;
    Setting s = halved ? sym[static_cast<std::size_t>(model)] : Setting{cat[static_cast<std::size_t>(model)], Isometry::identity()};
    PeriodData pd;
    BrokenLoop loop;
    if (halved) {
      pd = PeriodData::for_order(Rational(1, 2), Rational(1), 2 * pick(rng) + 1);  // odd m: q' = 1/2
      loop = random_loop(s, half, 0.1, rng);
    } else {
      pd = PeriodData::for_order(Rational(1), Rational(1), 1 + 2 * pick(rng) + (i / 8) % 2);  // m in 1..8
      loop = random_loop(s, full, 0.1, rng);
    }
    worst = std::max(worst, iterated_energy_identity_check(s.manifold, loop, pd).residual);
  }
  return {worst < 1e-12, std::to_string(cases) + " cases, max residual " + fmt(worst, 3)};
}

// 3. Index of the m-fold great circle against the Jacobi conjugate-point count.
Check index_oracle() {
  Check v{true, ""};
  const Setting s{Manifold::round_sphere(1.0), Isometry::identity()};
  FlowConfig flow;
  for (int m = 1; m <= 4; ++m) {
    const GridPtr grid = make_grid(TimeGrid::uniform(16 * m, 1.0));
    const BrokenLoop gc = great_circle(s.manifold, grid, Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(), m);
    const GeodesicRecord rec = make_record(s, gc, flow);
    const SpectrumReport sp = discrete_hessian(s, rec, PeriodData{Rational(1), Rational(1), Rational(0), 0});
    Vec u(3);
    u << 0.0, 1.0, 0.0;
    const int oracle = jacobi_conjugate_count(s.manifold, Tangent{gc.at(0), u}, 2.0 * kPi * m);
    v.pass = v.pass && sp.index == oracle && oracle == 2 * m - 1;
    v.detail += (m > 1 ? ", " : "") + std::string("m=") + std::to_string(m) + ": " + std::to_string(sp.index) + " vs " +
                std::to_string(oracle);
  }
  return v;
}

// 4. Index dichotomy: flat minima stay at zero, the sphere circle grows.
Check dichotomy() {
  FlowConfig flow;
  Check v{true, ""};
  const Setting tor{Manifold::flat_torus(), Isometry::identity()};
  const GridPtr grid = make_grid(TimeGrid::uniform(16, 1.0));
  for (const Eigen::Vector2i& w : {Eigen::Vector2i(1, 0), Eigen::Vector2i(1, 1)}) {
    const GeodesicRecord rec = make_record(tor, torus_line(tor.manifold, grid, {0.1, 0.2}, w), flow);
    const DichotomyScan scan = dichotomy_scan(tor, rec, Rational(1), Rational(1), 10);
    v.pass = v.pass && scan.verdict == Verdict::AllZero && scan.entries.size() == 10;
    v.detail += "torus (" + std::to_string(w[0]) + "," + std::to_string(w[1]) + ") " + std::string(to_string(scan.verdict)) + "; ";
  }
  const Setting sph{Manifold::round_sphere(1.0), Isometry::identity()};
  const GeodesicRecord rec =
      make_record(sph, great_circle(sph.manifold, grid, Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX()), flow);
  const DichotomyScan scan = dichotomy_scan(sph, rec, Rational(1), Rational(1), 10);
  bool increasing = scan.entries.size() == 10;
  std::string idx;
  for (std::size_t i = 0; i < scan.entries.size(); ++i) {
    if (i > 0 && scan.entries[i].spectrum.index <= scan.entries[i - 1].spectrum.index) increasing = false;
    idx += (i ? "," : "") + std::to_string(scan.entries[i].spectrum.index);
  }
  v.pass = v.pass && scan.verdict == Verdict::Growing && increasing;
  v.detail += "sphere " + std::string(to_string(scan.verdict)) + " (" + idx + ")";
  return v;
}

// 5. Shortening does not raise interval energies; r_1 respects the energy estimate.
Check shortening(std::uint64_t seed) {
  Rng rng(seed);
  const auto settings = involutive_settings();
  const GridPtr grid = make_grid(TimeGrid::pinned(32, 1.0, 0.5));
  const int loops = 500, s_samples = 20;
  int monotone_violations = 0, estimate_violations = 0, rejected = 0;
  double worst_rise = 0.0, worst_excess = -1e300;
  for (int i = 0; i < loops;) {
    const Setting& s = settings[static_cast<std::size_t>(i % 4)];
    const BrokenLoop loop = random_symmetric_loop(s, grid, 0.05, rng);
    if (max_segment_length(s.manifold, loop) >= s.manifold.injrad() / 3.0) {
      ++rejected;
      continue;
    }
    std::vector<double> prev;
    for (int j = 0; j < s_samples; ++j) {
      const ShortenResult r = shorten(s, loop, double(j) / (s_samples - 1));
      for (std::size_t c = 0; c < prev.size(); ++c) {
        const double rise = r.interval_energies[c] - prev[c];
        worst_rise = std::max(worst_rise, rise);
        if (rise > 1e-12 * (1.0 + prev[c])) ++monotone_violations;
      }
      prev = r.interval_energies;
    }
    const BrokenLoop r1 = shorten(s, loop, 1.0).loop;
    const double out = std::max(energy_Fq(s.manifold, r1), energy_Fq_prime(s.manifold, r1));
    const double excess = out - energy_Fq(s.manifold, loop);
    worst_excess = std::max(worst_excess, excess);
    if (excess > 1e-9) ++estimate_violations;
    ++i;
  }
  return {monotone_violations == 0 && estimate_violations == 0,
          std::to_string(loops) + " loops (" + std::to_string(rejected) + " redrawn), " +
              std::to_string(monotone_violations) + " monotonicity and " + std::to_string(estimate_violations) +
              " estimate violations; max rise " + fmt(worst_rise, 3) + ", max r1 excess " + fmt(worst_excess, 3)};
}

// 6. Bangert homotopy: the excess over the boundary decays like 1/m.
Check bangert_decay() {
  const Manifold tor = Manifold::flat_torus();
  const LoopFamily fam = torus_circle_family(tor, make_grid(TimeGrid::uniform(32, 1.0)), 65, 0.2);
  const BangertScan scan = bangert_scan(tor, fam, {2, 4, 8, 16});
  double lo = 1e300, hi = -1e300;
  std::string table;
  bool positive = true;
  for (std::size_t i = 0; i < scan.ms.size(); ++i) {
    const double md = scan.ms[i] * scan.deltas[i];
    positive = positive && scan.deltas[i] > 0.0;
    lo = std::min(lo, md);
    hi = std::max(hi, md);
    table += (i ? ", " : "") + fmt(md, 4);
  }
  const bool pass = positive && hi <= 4.0 * lo && scan.deltas.back() < scan.deltas.front() / 4.0;
  return {pass, "m*delta = " + table + "; delta(16)/delta(2) = " + fmt(scan.deltas.back() / scan.deltas.front(), 4) +
                    "; exponent " + fmt(scan.exponent, 4)};
}

// 7. Minimax over a Birkhoff sweep of the triaxial ellipsoid.
Check ellipsoid_minimax() {
  const Eigen::Vector3d ax(1.0, 1.1, 1.2);
  const Setting s{Manifold::ellipsoid(ax[0], ax[1], ax[2]), Isometry::identity()};
  const LoopFamily fam = ellipsoid_sweep_family(s.manifold, make_grid(TimeGrid::uniform(32, 1.0)), 256, {0.3, 0.2, 1.0});
  const MinimaxResult res = minimax(s, fam, FlowConfig{}, MinimaxConfig{});
  auto perimeter = [](double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double t) { return std::hypot(a * std::sin(t), b * std::cos(t)); }, 0.0, 2.0 * kPi);
  };
  const double shortest = std::min({perimeter(ax[0], ax[1]), perimeter(ax[0], ax[2]), perimeter(ax[1], ax[2])});
  const double oracle = shortest * shortest;
  const double rel = (res.c - oracle) / oracle;
  return {!res.flag && std::abs(rel) < 0.01,
          "c = " + fmt(res.c, 10) + ", oracle " + fmt(oracle, 10) + ", relative error " + fmt(rel, 3) + ", " +
              std::to_string(res.rounds) + " rounds" + (res.flag ? ", flag " + std::string(to_string(*res.flag)) : "")};
}

// 8. Polydiscs below the convexity radius are geodesically convex.
Check polydisc_convexity(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto cat = catalog();
  const GridPtr grid = make_grid(TimeGrid::uniform(12, 1.0));
  const int pairs = 1000;
  int violations = 0, checks = 0;
  for (int i = 0; i < pairs; ++i) {
    const Setting s{cat[static_cast<std::size_t>(i % 4)], Isometry::identity()};
    const Manifold& m = s.manifold;
    const double R = m.convexity_radius();
    const double r = R * (0.05 + 0.95 * unit(rng));
    const BrokenLoop center = random_loop(s, grid, 0.1, rng);
    auto inside = [&] {
      BrokenLoop out = center;
      for (Point& p : out.nodes) p = m.exp(Tangent{p, m.random_tangent(p, 0.999 * r * unit(rng), rng)});
      return out;
    };
    const BrokenLoop a = inside(), b = inside();
    if (!in_polydisc(m, center, r, a) || !in_polydisc(m, center, r, b)) {
      ++violations;
      continue;
    }
    for (int j = 1; j < 10; ++j) {
      ++checks;
      if (!in_polydisc(m, center, r, interpolate_loops(s, a, b, j / 10.0))) ++violations;
    }
  }
  return {violations == 0, std::to_string(pairs) + " pairs, " + std::to_string(checks) + " interpolants, " +
                               std::to_string(violations) + " violations"};
}

// 9. Analytic gradient against central differences.
Check gradient_check(std::uint64_t seed) {
  Rng rng(seed);
  const double alpha = 1.0;
  const std::vector<std::pair<Setting, GridPtr>> cases = {
      {{Manifold::round_sphere(1.0), Isometry::rotation(Eigen::Vector3d::UnitZ(), alpha)},
       make_grid(TimeGrid::pinned(16, 1.0, alpha / (2.0 * kPi)))},
      {{Manifold::flat_torus(), Isometry::translation({0.3, 0.1})}, make_grid(TimeGrid::pinned(16, 1.0, 0.5))},
      {{Manifold::ellipsoid(1.0, 1.1, 1.2), Isometry::identity()}, make_grid(TimeGrid::uniform(16, 1.0))},
      {{Manifold::circle_times_sphere(2.0, 1.0), Isometry::product(0.5, Eigen::Vector3d::UnitZ(), 0.7)},
       make_grid(TimeGrid::pinned(16, 1.0, 0.25))},
  };
  const FlowConfig flow;
  double worst = 0.0;
  std::string per;
  for (const auto& [s, grid] : cases) {
    double w = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Chain chain = Chain::for_loop(s, random_loop(s, grid, 0.1, rng));
      const Eigen::VectorXd g = chain.gradient();
      const Eigen::VectorXd fd = finite_difference_gradient(chain, flow.finite_diff_h);
      w = std::max(w, (g - fd).norm() / std::max(fd.norm(), 1e-12));
    }
    per += (per.empty() ? "" : ", ") + to_string(s.manifold.kind()) + " " + fmt(w, 3);
    worst = std::max(worst, w);
  }
  return {worst < 1e-5, "max relative error " + per};
}

// 10. Residue classes of mp+1 mod q against brute-force division.
Check residue_bookkeeping(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<long long> small(1, 12), mult(1, 6), order(0, 60);
  const int triples = 1000;
  int mismatches = 0;
  for (int i = 0; i < triples; ++i) {
    const Rational p(small(rng), small(rng));
    const Rational q = p * Rational(mult(rng));
    const long long m = order(rng);
    const auto classes = residue_partition(p, q, m, m + 3);
    for (long long mm = m; mm <= m + 3; ++mm) {
      // Subtract q until the remainder falls in [0, q).
      Rational r = Rational(mm) * p + Rational(1);
      while (r >= q) r -= q;
      int hits = 0;
      for (const auto& [qp, ms] : classes) {
        const bool has = std::find(ms.begin(), ms.end(), mm) != ms.end();
        hits += has;
        if (has && qp != r) ++mismatches;
      }
      if (hits != 1 || PeriodData::for_order(p, q, mm).q_prime != r) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(triples) + " triples (4 orders each), " + std::to_string(mismatches) + " mismatches"};
}

struct Criterion {
  int id;
  const char* title;
  double limit;
  std::function<Check(std::uint64_t)> run;
};

}  // namespace

std::vector<CriterionResult> run_acceptance(std::ostream& out, const std::vector<int>& only, std::uint64_t seed) {
  const std::vector<Criterion> all = {
      {1, "uniqueness on the rotated sphere", 30.0, uniqueness_on_rotated_sphere},
      {2, "iteration energy identity", 10.0, energy_identity},
      {3, "index oracle agreement", 60.0, [](std::uint64_t) { return index_oracle(); }},
      {4, "index dichotomy scan", 120.0, [](std::uint64_t) { return dichotomy(); }},
      {5, "shortening monotonicity and r1 estimate", 20.0, shortening},
      {6, "Bangert decay", 120.0, [](std::uint64_t) { return bangert_decay(); }},
      {7, "minimax vs shooting oracle", 300.0, [](std::uint64_t) { return ellipsoid_minimax(); }},
      {8, "polydisc convexity", 0.0, polydisc_convexity},
      {9, "gradient correctness", 0.0, gradient_check},
      {10, "residue bookkeeping", 0.0, residue_bookkeeping},
  };
  std::vector<CriterionResult> results;
  for (const Criterion& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    CriterionResult r{c.id, c.title, false, 0.0, c.limit, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Check v = c.run(seed + static_cast<std::uint64_t>(c.id));
      r.pass = v.pass;
      r.detail = v.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("threw ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit > 0.0 && r.seconds > c.limit) {
      r.pass = false;
      r.detail += "; runtime limit exceeded";
    }
    out << (r.pass ? "PASS" : "FAIL") << " [" << r.id << "] " << r.title << " (" << fmt(r.seconds, 3) << " s";
    if (c.limit > 0.0) out << " of " << fmt(c.limit, 3) << " s";
    out << "): " << r.detail << std::endl;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace geolab
