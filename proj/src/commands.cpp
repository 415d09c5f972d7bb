#include "geolab/commands.hpp"

#include "geolab/error.hpp"
#include "geolab/serialize.hpp"
#include "geolab/starts.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <thread>

namespace geolab {

namespace {

constexpr double kPi = std::numbers::pi;

Rng start_rng(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x67656fu};
  return Rng(seq);
}

Eigen::Vector3d isometry_axis(const Isometry& iso) {
  const Eigen::VectorXd p = iso.parameters();
  if (iso.kind() == IsometryKind::Rotation) return p.head<3>();
  if (iso.kind() == IsometryKind::Product) return p.segment<3>(1);
  return Eigen::Vector3d::UnitZ();
}

Eigen::Vector2i to_vec(const std::array<int, 2>& w) { return {w[0], w[1]}; }

Point sphere_point(const Manifold& m, const Eigen::Vector3d& y) {
  Vec z(3);
  z = y;
  return m.make_point(z);
}

/// Runs f(i) for i in [0, n) on up to hardware_concurrency threads.
template <class F>
void parallel_for(int n, F&& f) {
  const int workers = std::max(1, std::min<int>(n, static_cast<int>(std::thread::hardware_concurrency())));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ------------------------------------------------------------ output

class Output {
 public:
  Output(const RunConfig& cfg, std::string name) : cfg_(cfg), name_(std::move(name)) {
    std::filesystem::create_directories(cfg.out_dir);
  }

  std::string path(const std::string& file) const { return (std::filesystem::path(cfg_.out_dir) / file).string(); }

  json header() const {
    return {{"command", name_}, {"config_hash", cfg_.hash}, {"seed", cfg_.seed}, {"config", json::parse(cfg_.canonical)}};
  }

  void write_json(json body) const {
    require_finite(body, name_);
    json doc = header();
    doc.update(body);
    std::ofstream os(path(name_ + ".json"));
    os << std::setw(2) << doc << "\n";
  }

  /// Flat table behind one comment line carrying the config hash and seed.
  void write_csv(const std::string& table, const std::vector<std::string>& columns,
                 const std::vector<std::vector<json>>& rows) const {
    for (const auto& r : rows) {
      for (const auto& v : r) require_finite(v, table);
    }
    std::ofstream os(path(name_ + "_" + table + ".csv"));
    os << "# geolab " << name_ << " config_hash=" << cfg_.hash << " seed=" << cfg_.seed << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n" << std::setprecision(17);
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        os << (i ? "," : "");
        if (r[i].is_string()) {
          os << r[i].get<std::string>();
        } else {
          os << r[i].dump();
        }
      }
      os << "\n";
    }
  }

 private:
  const RunConfig& cfg_;
  std::string name_;
};

std::string rational_text(const Rational& r) {
  return r.denominator() == 1 ? std::to_string(r.numerator())
                              : std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace

// ------------------------------------------------------------ start loops

BrokenLoop find_start(const RunConfig& cfg, int index) {
  const Setting& s = cfg.setting;
  const Manifold& m = s.manifold;
  const FindParams& fp = cfg.find;
  Rng rng = start_rng(cfg.seed, index);
  if (fp.start == "random") return random_loop(s, cfg.grid, fp.noise, rng);
  BrokenLoop loop;
  if (fp.start == "rotation_orbit") {
    loop = rotation_orbit(m, cfg.grid, isometry_axis(s.isometry), m.random_point(rng));
  } else if (fp.start == "torus_line") {
    if (m.kind() != ModelKind::FlatTorus) throw Error(ErrorCode::ConfigError, "find.start: torus_line needs a torus");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::Vector2d base = std::get<TorusModel>(m.model()).lattice * Eigen::Vector2d(unit(rng), unit(rng));
    loop = torus_line(m, cfg.grid, base, to_vec(fp.winding));
  } else {
    std::normal_distribution<double> normal;
    Eigen::Vector3d n(normal(rng), normal(rng), normal(rng));
    loop = great_circle(m, cfg.grid, n, n.unitOrthogonal());
  }
  return perturb_loop(s, loop, fp.noise, rng);
}

// ------------------------------------------------------------ families

LoopFamily ellipsoid_sweep_family(const Manifold& m, const GridPtr& grid, int samples, const Eigen::Vector3d& tilt) {
  if (m.kind() != ModelKind::TriaxialEllipsoid && m.kind() != ModelKind::RoundSphere) {
    throw Error(ErrorCode::PreViolation, "ellipsoid sweep needs an embedded sphere or ellipsoid");
  }
  Eigen::Vector3d ax = Eigen::Vector3d::Ones();
  if (m.kind() == ModelKind::TriaxialEllipsoid) {
    ax = std::get<EllipsoidModel>(m.model()).axes;
  } else {
    ax *= std::get<SphereModel>(m.model()).radius;
  }
  // Plane sections of the ellipsoid are images of parallel sections of the unit sphere.
  const Eigen::Vector3d nt = (ax.asDiagonal() * tilt.normalized()).normalized();
  const Eigen::Vector3d e1 = nt.unitOrthogonal();
  const Eigen::Vector3d e2 = nt.cross(e1);
  const double q = grid->q();
  std::vector<BrokenLoop> loops;
  for (int i = 0; i < samples; ++i) {
    const double h = -std::cos(kPi * i / (samples - 1));
    const double r = std::sqrt(std::max(0.0, 1.0 - h * h));
    loops.push_back(sample_curve(grid, [&](double t) {
      const double a = 2.0 * kPi * t / q;
      const Eigen::Vector3d y = h * nt + r * (std::cos(a) * e1 + std::sin(a) * e2);
      return sphere_point(m, ax.cwiseProduct(y));
    }));
  }
  return interval_family(std::move(loops));
}

LoopFamily torus_translates_family(const Manifold& m, const GridPtr& grid, int samples, const Eigen::Vector2i& winding) {
  if (m.kind() != ModelKind::FlatTorus) throw Error(ErrorCode::PreViolation, "torus translates need the flat torus");
  const Eigen::Matrix2d& lattice = std::get<TorusModel>(m.model()).lattice;
  // Translate across the class: along the lattice direction not parallel to the winding.
  const Eigen::Vector2d across = winding[1] == 0 ? lattice.col(1) : lattice.col(0);
  std::vector<BrokenLoop> loops;
  for (int i = 0; i < samples; ++i) loops.push_back(torus_line(m, grid, across * (double(i) / samples), winding));
  return interval_family(std::move(loops), true);
}

LoopFamily latitude_sweep_family(const Setting& s, const GridPtr& grid, int samples) {
  const Manifold& m = s.manifold;
  if (m.kind() != ModelKind::RoundSphere && m.kind() != ModelKind::TriaxialEllipsoid) {
    throw Error(ErrorCode::PreViolation, "latitude sweep needs an embedded sphere or ellipsoid");
  }
  const Eigen::Vector3d axis = isometry_axis(s.isometry).normalized();
  const Eigen::Vector3d e1 = axis.unitOrthogonal();
  std::vector<BrokenLoop> loops;
  for (int i = 0; i < samples; ++i) {
    const double z = -std::cos(kPi * i / (samples - 1));
    const Point x = sphere_point(m, std::sqrt(std::max(0.0, 1.0 - z * z)) * e1 + z * axis);
    loops.push_back(rotation_orbit(m, grid, axis, x));
  }
  return interval_family(std::move(loops));
}

LoopFamily torus_circle_family(const Manifold& m, const GridPtr& grid, int samples, double radius) {
  if (m.kind() != ModelKind::FlatTorus) throw Error(ErrorCode::PreViolation, "torus circle family needs the flat torus");
  const Eigen::Vector2d c = std::get<TorusModel>(m.model()).lattice * Eigen::Vector2d(0.5, 0.5);
  const double q = grid->q();
  std::vector<BrokenLoop> loops;
  for (int i = 0; i < samples; ++i) {
    const double r = radius * std::sin(kPi * i / (samples - 1));
    loops.push_back(sample_curve(grid, [&](double t) {
      Vec z(2);
      z << c[0] + r * std::cos(2.0 * kPi * t / q), c[1] + r * std::sin(2.0 * kPi * t / q);
      return m.make_point(z);
    }));
  }
  return interval_family(std::move(loops));
}

LoopFamily sphere_latitude_family(const Manifold& m, const GridPtr& grid, int samples, double radius) {
  if (m.kind() != ModelKind::RoundSphere) throw Error(ErrorCode::PreViolation, "latitude family needs the round sphere");
  const double rad = std::get<SphereModel>(m.model()).radius;
  const double q = grid->q();
  std::vector<BrokenLoop> loops;
  for (int i = 0; i < samples; ++i) {
    const double polar = radius / rad * std::sin(kPi * i / (samples - 1));
    loops.push_back(sample_curve(grid, [&](double t) {
      const double a = 2.0 * kPi * t / q;
      return sphere_point(m, Eigen::Vector3d(std::sin(polar) * std::cos(a), std::sin(polar) * std::sin(a), std::cos(polar)));
    }));
  }
  return interval_family(std::move(loops));
}

LoopFamily constant_family(const Manifold&, const GridPtr& grid, int samples, const Point& x) {
  return interval_family(std::vector<BrokenLoop>(static_cast<std::size_t>(samples), constant_loop(grid, x)));
}

// ------------------------------------------------------------ find

FindReport run_find(const RunConfig& cfg) {
  const Setting& s = cfg.setting;
  const Manifold& m = s.manifold;
  const int n = cfg.find.starts;

  struct Outcome {
    std::optional<GeodesicRecord> record;
    std::string failure;
    std::vector<TrajectoryPoint> trajectory;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    Outcome& o = outcomes[static_cast<std::size_t>(i)];
    try {
      BrokenLoop loop = find_start(cfg, i);
      if (cfg.find.descend_first) {
        DescentResult d = descend(s, loop, cfg.flow);
        o.trajectory = std::move(d.trajectory);
        loop = std::move(d.loop);
      }
      o.record = refine_critical(s, loop, cfg.flow).record;
    } catch (const std::exception& e) {
      o.failure = "start " + std::to_string(i) + ": " + e.what();
    }
  });

  FindReport rep;
  auto add = [&](std::vector<FindBasin>& basins, const GeodesicRecord& rec, int start) {
    for (FindBasin& b : basins) {
      if (image_distance(m, b.record.image_signature, rec.image_signature) < cfg.find.dedup_tol) {
        ++b.count;
        b.starts.push_back(start);
        return;
      }
    }
    basins.push_back({rec, 1, {start}});
  };
  for (int i = 0; i < n; ++i) {
    Outcome& o = outcomes[static_cast<std::size_t>(i)];
    rep.trajectories.push_back(std::move(o.trajectory));
    if (!o.record) {
      rep.failures.push_back(o.failure);
      continue;
    }
    switch (o.record->kind) {
      case RecordKind::Constant: add(rep.constants, *o.record, i); break;
      case RecordKind::Kinked: ++rep.kinked; break;
      case RecordKind::Geodesic:
        add(rep.geodesics, *o.record, i);
        rep.converged.push_back(*o.record);
        break;
    }
  }
  for (const FindBasin& b : rep.geodesics) {
    std::size_t c = rep.classes.size();
    if (m.kind() == ModelKind::FlatTorus) {
      const Eigen::Vector2i w = torus_winding(m, b.record.loop);
      for (c = 0; c < rep.classes.size(); ++c) {
        const Eigen::Vector2i v = torus_winding(m, rep.classes[c].record.loop);
        if (v == w || v == -w) break;
      }
    }
    if (c == rep.classes.size()) {
      rep.classes.push_back({b.record, 0, {}});
      rep.class_images.push_back(0);
    }
    rep.classes[c].count += b.count;
    rep.classes[c].starts.insert(rep.classes[c].starts.end(), b.starts.begin(), b.starts.end());
    ++rep.class_images[c];
  }
  return rep;
}

// ------------------------------------------------------------ commands

int cmd_find(const RunConfig& cfg, std::ostream& log) {
  const FindReport rep = run_find(cfg);
  Output out(cfg, "find");

  json geos = json::array();
  for (const FindBasin& b : rep.geodesics) {
    json r = record_to_json(b.record);
    r["basin_count"] = b.count;
    r["starts"] = b.starts;
    geos.push_back(std::move(r));
  }
  json classes = json::array();
  std::vector<std::vector<json>> rows;
  for (std::size_t i = 0; i < rep.classes.size(); ++i) {
    const FindBasin& b = rep.classes[i];
    classes.push_back({{"energy", b.record.energy},
                       {"index", b.record.index},
                       {"nullity", b.record.nullity},
                       {"basin_count", b.count},
                       {"images", rep.class_images[i]},
                       {"starts", b.starts}});
    rows.push_back({static_cast<int>(i), b.record.energy, b.record.index, b.record.nullity, b.count,
                    rep.class_images[i], b.record.image_signature.length, b.record.kink_defect});
  }
  json consts = json::array();
  for (const FindBasin& b : rep.constants) {
    json r = record_to_json(b.record);
    r["basin_count"] = b.count;
    consts.push_back(std::move(r));
  }
  out.write_json({{"distinct_geodesics", rep.geodesics.size()},
                  {"classes", classes},
                  {"geodesics", geos},
                  {"constants", consts},
                  {"kinked", rep.kinked},
                  {"failures", rep.failures}});
  out.write_csv("records", {"class", "energy", "index", "nullity", "basin_count", "images", "length", "kink_defect"}, rows);

  std::ofstream traj(out.path("find_trajectories.jsonl"));
  for (std::size_t i = 0; i < rep.trajectories.size(); ++i) {
    traj << "{\"start\": " << i << "}\n";
    for (const TrajectoryPoint& p : rep.trajectories[i]) write_trajectory_line(traj, p);
  }

  log << "find: " << cfg.find.starts << " starts, " << rep.geodesics.size() << " distinct geodesic image(s) in " << rep.classes.size() << " class(es), "
      << rep.constants.size() << " constant, " << rep.kinked << " kinked, " << rep.failures.size() << " failed\n";
  log << std::setprecision(10);
  for (std::size_t i = 0; i < rep.classes.size(); ++i) {
    const GeodesicRecord& r = rep.classes[i].record;
    log << "  [" << i << "] energy " << r.energy << "  index " << r.index << "  nullity " << r.nullity << "  basins "
        << rep.classes[i].count << "  images " << rep.class_images[i] << "\n";
  }
  for (const std::string& f : rep.failures) log << "  " << f << "\n";
  return rep.failures.empty() ? kExitOk : kExitNumerical;
}

int cmd_iterate(const RunConfig& cfg, std::ostream& log) {
  const Setting& s = cfg.setting;
  const Manifold& m = s.manifold;
  const IterateParams& ip = cfg.iterate;
  BrokenLoop start;
  if (ip.record == "great_circle") {
    start = great_circle(m, cfg.grid, isometry_axis(s.isometry), isometry_axis(s.isometry).unitOrthogonal());
  } else if (ip.record == "torus_line") {
    if (m.kind() != ModelKind::FlatTorus) throw Error(ErrorCode::ConfigError, "iterate.record: torus_line needs a torus");
    start = torus_line(m, cfg.grid, Eigen::Vector2d::Zero(), to_vec(ip.winding));
  } else {
    Rng rng = start_rng(cfg.seed, 0);
    start = constant_loop(cfg.grid, m.random_point(rng));
  }
  const GeodesicRecord rec = refine_critical(s, start, cfg.flow).record;
  const DichotomyScan scan = dichotomy_scan(s, rec, ip.p, ip.q, ip.m_max, ip.threshold);
  const auto classes = residue_partition(ip.p, ip.q, 1, ip.m_max);

  Output out(cfg, "iterate");
  json residues = json::array();
  for (const auto& [qp, ms] : classes) residues.push_back({{"q_prime", rational_text(qp)}, {"m", ms}});
  out.write_json({{"record", record_to_json(rec)}, {"scan", scan_to_json(scan)}, {"residues", residues}});

  std::vector<std::vector<json>> rows;
  for (const ScanEntry& e : scan.entries) {
    rows.push_back({e.m, rational_text(e.q_prime), e.spectrum.index, e.spectrum.nullity,
                    e.spectrum.eigenvalues.empty() ? 0.0 : e.spectrum.eigenvalues.front(),
                    std::string(to_string(scan.verdict))});
  }
  out.write_csv("scan", {"m", "q_prime", "index", "nullity", "lowest_eigenvalue", "verdict"}, rows);

  log << "iterate: record " << to_string(rec.kind) << " energy " << std::setprecision(10) << rec.energy << "\n";
  for (const ScanEntry& e : scan.entries) {
    log << "  m " << e.m << "  q' " << rational_text(e.q_prime) << "  index " << e.spectrum.index << "  nullity "
        << e.spectrum.nullity << "\n";
  }
  log << "  verdict " << to_string(scan.verdict) << "\n";
  return kExitOk;
}

int cmd_minimax(const RunConfig& cfg, std::ostream& log) {
  const Setting& s = cfg.setting;
  const MinimaxParams& mp = cfg.minimax;
  LoopFamily family;
  if (mp.family == "ellipsoid_sweep") {
    family = ellipsoid_sweep_family(s.manifold, cfg.grid, mp.samples, {mp.tilt[0], mp.tilt[1], mp.tilt[2]});
  } else if (mp.family == "torus_translates") {
    family = torus_translates_family(s.manifold, cfg.grid, mp.samples, to_vec(mp.winding));
  } else {
    family = latitude_sweep_family(s, cfg.grid, mp.samples);
  }
  const MinimaxResult res = minimax(s, std::move(family), cfg.flow, mp.cfg);

  Output out(cfg, "minimax");
  json body{{"c", res.c},
            {"rounds", res.rounds},
            {"converged", res.converged},
            {"escapes", res.escapes},
            {"family_min", res.family_min},
            {"samples", res.family.size()},
            {"max_trace", res.max_trace},
            {"flag", res.flag ? json(std::string(to_string(*res.flag))) : json(nullptr)}};
  if (res.record) body["record"] = record_to_json(*res.record);
  out.write_json(std::move(body));
  std::vector<std::vector<json>> rows;
  for (std::size_t i = 0; i < res.max_trace.size(); ++i) rows.push_back({static_cast<int>(i), res.max_trace[i]});
  out.write_csv("trace", {"round", "max_energy"}, rows);

  log << std::setprecision(12) << "minimax: c = " << res.c << " after " << res.rounds << " rounds"
      << (res.converged ? "" : " (not converged)") << ", " << res.family.size() << " samples\n";
  if (res.record) {
    log << "  record " << to_string(res.record->kind) << " energy " << res.record->energy << " index "
        << res.record->index << " nullity " << res.record->nullity << "\n";
  }
  return res.flag ? kExitNumerical : kExitOk;
}

int cmd_bangert(const RunConfig& cfg, std::ostream& log) {
  const Manifold& m = cfg.setting.manifold;
  const BangertParams& bp = cfg.bangert;
  if (!cfg.setting.isometry.is_identity()) throw Error(ErrorCode::ConfigError, "isometry: bangert needs the identity");
  LoopFamily family;
  if (bp.family == "torus_circle") {
    family = torus_circle_family(m, cfg.grid, bp.samples, bp.radius);
  } else if (bp.family == "sphere_latitude") {
    family = sphere_latitude_family(m, cfg.grid, bp.samples, bp.radius);
  } else {
    Rng rng = start_rng(cfg.seed, 0);
    family = constant_family(m, cfg.grid, bp.samples, m.random_point(rng));
  }
  const BangertScan scan = bangert_scan(m, family, bp.ms, bp.x_per_slot);

  Output out(cfg, "bangert");
  json table = json::array();
  std::vector<std::vector<json>> rows;
  for (std::size_t i = 0; i < scan.ms.size(); ++i) {
    const double d = scan.deltas[i];
    table.push_back({{"m", scan.ms[i]}, {"delta", d}, {"m_delta", scan.ms[i] * d}});
    rows.push_back({scan.ms[i], d, scan.ms[i] * d});
  }
  // The exponent is undefined once some delta vanishes (constant families).
  out.write_json({{"table", table},
                  {"constant", scan.constant},
                  {"exponent", std::isfinite(scan.exponent) ? json(scan.exponent) : json(nullptr)}});
  out.write_csv("table", {"m", "delta", "m_delta"}, rows);

  log << std::setprecision(8) << "bangert: " << bp.family << "\n";
  for (std::size_t i = 0; i < scan.ms.size(); ++i) {
    log << "  m " << scan.ms[i] << "  delta " << scan.deltas[i] << "  m*delta " << scan.ms[i] * scan.deltas[i] << "\n";
  }
  log << "  C " << scan.constant << "  exponent ";
  if (std::isfinite(scan.exponent)) {
    log << scan.exponent << "\n";
  } else {
    log << "undefined\n";
  }
  return kExitOk;
}

}  // namespace geolab
