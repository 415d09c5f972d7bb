#include "geolab/config.hpp"

#include "geolab/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace geolab {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ConfigError, path + ": " + what);
}

/// Reads the keys of one object and rejects whatever is left unread.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }
  const std::string& path() const { return path_; }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) fail(at(key), "missing");
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key) {
    const json& v = raw(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      fail(at(key), "has the wrong type");
    }
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  Section sub(const std::string& key) { return Section(raw(key), at(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double positive(Section& s, const std::string& key, double fallback) {
  const double v = s.get<double>(key, fallback);
  if (!(v > 0.0)) fail(s.at(key), "must be positive");
  return v;
}

Rational rational(Section& s, const std::string& key, Rational fallback) {
  if (!s.has(key)) return fallback;
  const json& v = s.raw(key);
  try {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<long long>());
    if (v.is_number()) return parse_rational(v.dump());
  } catch (const Error& e) {
    fail(s.at(key), e.what());
  }
  fail(s.at(key), "expected a rational number");
}

Eigen::Vector3d vec3(Section& s, const std::string& key) {
  const auto v = s.get<std::vector<double>>(key);
  if (v.size() != 3) fail(s.at(key), "expected three numbers");
  return {v[0], v[1], v[2]};
}

Manifold read_manifold(Section sec) {
  const auto kind = sec.get<std::string>("kind");
  Manifold m = Manifold::round_sphere();
  if (kind == "sphere") {
    m = Manifold::round_sphere(positive(sec, "radius", 1.0));
  } else if (kind == "torus") {
    Eigen::Matrix2d lattice = Eigen::Matrix2d::Identity();
    if (sec.has("lattice")) {
      const auto rows = sec.get<std::vector<std::vector<double>>>("lattice");
      if (rows.size() != 2 || rows[0].size() != 2 || rows[1].size() != 2) fail(sec.at("lattice"), "expected two 2-vectors");
      lattice << rows[0][0], rows[1][0], rows[0][1], rows[1][1];
      if (!(std::abs(lattice.determinant()) > 1e-12)) fail(sec.at("lattice"), "basis vectors are dependent");
    }
    m = Manifold::flat_torus(lattice);
  } else if (kind == "ellipsoid") {
    const Eigen::Vector3d a = vec3(sec, "axes");
    if (!(a.minCoeff() > 0.0)) fail(sec.at("axes"), "must be positive");
    m = Manifold::ellipsoid(a[0], a[1], a[2]);
  } else if (kind == "circle_times_sphere") {
    m = Manifold::circle_times_sphere(positive(sec, "circle_length", 1.0), positive(sec, "sphere_radius", 1.0));
  } else {
    fail(sec.at("kind"), "unknown manifold '" + kind + "'");
  }
  sec.finish();
  return m;
}

Isometry read_isometry(Section sec) {
  const auto kind = sec.get<std::string>("kind");
  Isometry iso = Isometry::identity();
  if (kind == "identity") {
  } else if (kind == "translation") {
    const auto v = sec.get<std::vector<double>>("shift");
    if (v.size() != 2) fail(sec.at("shift"), "expected two numbers");
    iso = Isometry::translation({v[0], v[1]});
  } else if (kind == "rotation") {
    const Eigen::Vector3d axis = vec3(sec, "axis");
    if (!(axis.norm() > 0.0)) fail(sec.at("axis"), "must be nonzero");
    iso = Isometry::rotation(axis, sec.get<double>("angle"));
  } else if (kind == "product") {
    const Eigen::Vector3d axis = vec3(sec, "axis");
    if (!(axis.norm() > 0.0)) fail(sec.at("axis"), "must be nonzero");
    iso = Isometry::product(sec.get<double>("shift"), axis, sec.get<double>("angle"));
  } else {
    fail(sec.at("kind"), "unknown isometry '" + kind + "'");
  }
  sec.finish();
  return iso;
}

FlowConfig read_flow(Section sec) {
  FlowConfig f;
  const auto rule = sec.get<std::string>("step_rule", "backtracking");
  if (rule == "fixed") {
    f.step_rule = StepRule::Fixed;
  } else if (rule != "backtracking") {
    fail(sec.at("step_rule"), "expected 'fixed' or 'backtracking'");
  }
  f.fixed_step = positive(sec, "fixed_step", f.fixed_step);
  f.armijo = positive(sec, "armijo", f.armijo);
  f.grad_tol = positive(sec, "grad_tol", f.grad_tol);
  f.max_iters = sec.get<int>("max_iters", f.max_iters);
  f.finite_diff_h = positive(sec, "finite_diff_h", f.finite_diff_h);
  f.hessian_h = positive(sec, "hessian_h", f.hessian_h);
  f.newton_iters = sec.get<int>("newton_iters", f.newton_iters);
  sec.finish();
  try {
    f.validate();
  } catch (const Error& e) {
    fail("flow", e.what());
  }
  return f;
}

std::array<int, 2> winding(Section& sec, const std::string& key, std::array<int, 2> fallback) {
  if (!sec.has(key)) return fallback;
  const auto v = sec.get<std::vector<int>>(key);
  if (v.size() != 2) fail(sec.at(key), "expected two integers");
  return {v[0], v[1]};
}

void check_choice(Section& sec, const std::string& key, const std::string& value, std::initializer_list<const char*> options) {
  for (const char* o : options) {
    if (value == o) return;
  }
  fail(sec.at(key), "unsupported value '" + value + "'");
}

FindParams read_find(Section sec) {
  FindParams p;
  p.starts = sec.get<int>("starts", p.starts);
  if (p.starts < 1) fail(sec.at("starts"), "must be at least 1");
  p.start = sec.get<std::string>("start", p.start);
  check_choice(sec, "start", p.start, {"random", "rotation_orbit", "torus_line", "great_circle"});
  p.noise = sec.get<double>("noise", p.noise);
  if (!(p.noise >= 0.0)) fail(sec.at("noise"), "must be non-negative");
  p.descend_first = sec.get<bool>("descend_first", p.descend_first);
  p.winding = winding(sec, "winding", p.winding);
  p.dedup_tol = positive(sec, "dedup_tol", p.dedup_tol);
  sec.finish();
  return p;
}

IterateParams read_iterate(Section sec) {
  IterateParams p;
  p.p = rational(sec, "p", p.p);
  p.q = rational(sec, "q", p.q);
  if (!(p.p > 0) || !(p.q > 0)) fail(sec.path(), "p and q must be positive");
  p.m_max = sec.get<long long>("m_max", p.m_max);
  if (p.m_max < 1) fail(sec.at("m_max"), "must be at least 1");
  p.record = sec.get<std::string>("record", p.record);
  check_choice(sec, "record", p.record, {"great_circle", "torus_line", "constant"});
  p.winding = winding(sec, "winding", p.winding);
  p.threshold = sec.get<int>("threshold", p.threshold);
  sec.finish();
  return p;
}

MinimaxParams read_minimax(Section sec) {
  MinimaxParams p;
  p.family = sec.get<std::string>("family", p.family);
  check_choice(sec, "family", p.family, {"ellipsoid_sweep", "torus_translates", "latitude_sweep"});
  p.samples = sec.get<int>("samples", p.samples);
  if (p.samples < 3) fail(sec.at("samples"), "must be at least 3");
  if (sec.has("tilt")) {
    const Eigen::Vector3d t = vec3(sec, "tilt");
    p.tilt = {t[0], t[1], t[2]};
  }
  p.winding = winding(sec, "winding", p.winding);
  MinimaxConfig& c = p.cfg;
  c.max_rounds = sec.get<int>("max_rounds", c.max_rounds);
  c.stabilize_tol = sec.get<double>("stabilize_tol", c.stabilize_tol);
  c.stabilize_rounds = sec.get<int>("stabilize_rounds", c.stabilize_rounds);
  c.band = sec.get<double>("band", c.band);
  c.check_every = sec.get<int>("check_every", c.check_every);
  c.critical_dist = sec.get<double>("critical_dist", c.critical_dist);
  c.shorten_every = sec.get<int>("shorten_every", c.shorten_every);
  c.max_samples = sec.get<std::size_t>("max_samples", c.max_samples);
  sec.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    fail("minimax", e.what());
  }
  return p;
}

BangertParams read_bangert(Section sec) {
  BangertParams p;
  p.family = sec.get<std::string>("family", p.family);
  check_choice(sec, "family", p.family, {"torus_circle", "sphere_latitude", "constant"});
  p.ms = sec.get<std::vector<int>>("ms", p.ms);
  if (p.ms.empty()) fail(sec.at("ms"), "needs at least one m");
  for (int m : p.ms) {
    if (m < 1) fail(sec.at("ms"), "entries must be at least 1");
  }
  p.radius = positive(sec, "radius", p.radius);
  p.samples = sec.get<int>("samples", p.samples);
  if (p.samples < 3) fail(sec.at("samples"), "must be at least 3");
  p.x_per_slot = sec.get<int>("x_per_slot", p.x_per_slot);
  if (p.x_per_slot < 1) fail(sec.at("x_per_slot"), "must be at least 1");
  sec.finish();
  return p;
}

GridPtr read_grid(Section sec, const Manifold& m, double& energy_bound) {
  const double q = to_double(rational(sec, "q", Rational(1)));
  if (!(q > 0.0)) fail(sec.at("q"), "must be positive");
  double qp = 0.0;
  if (sec.has("q_prime")) {
    const json& v = sec.raw("q_prime");
    try {
      qp = v.is_string() ? to_double(parse_rational(v.get<std::string>())) : v.get<double>();
    } catch (const std::exception&) {
      fail(sec.at("q_prime"), "expected a number or rational string");
    }
  }
  if (!(qp >= 0.0 && qp < q)) fail(sec.at("q_prime"), "must lie in [0, q)");
  energy_bound = sec.get<double>("energy_bound");
  if (!(energy_bound > 0.0)) fail(sec.at("energy_bound"), "must be positive");
  TimeGrid g;
  const json& k = sec.raw("k");
  if (k.is_string()) {
    if (k.get<std::string>() != "auto") fail(sec.at("k"), "expected an integer or \"auto\"");
    g = TimeGrid::automatic(q, qp, m.injrad(), energy_bound);
  } else if (k.is_number_integer()) {
    const int kk = k.get<int>();
    if (kk < 2) fail(sec.at("k"), "must be at least 2");
    g = qp > 0.0 ? TimeGrid::pinned(kk, q, qp) : TimeGrid::uniform(kk, q);
  } else {
    fail(sec.at("k"), "expected an integer or \"auto\"");
  }
  sec.finish();
  if (!g.satisfies_spacing_bound(m.injrad(), energy_bound)) {
    std::ostringstream os;
    os << "grid spacing " << g.max_spacing() << " violates the bound "
       << TimeGrid::spacing_limit(m.injrad(), q, energy_bound) << " for energy_bound " << energy_bound;
    fail("grid.k", os.str());
  }
  return make_grid(std::move(g));
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": " + e.what());
  }
  RunConfig cfg;
  Section top(doc, "");
  const int version = top.get<int>("schema_version");
  if (version != kSchemaVersion) fail("schema_version", "unsupported version " + std::to_string(version));
  cfg.seed = top.get<std::uint64_t>("seed", 0);
  const Manifold m = read_manifold(top.sub("manifold"));
  const Isometry iso = top.has("isometry") ? read_isometry(top.sub("isometry")) : Isometry::identity();
  {
    Rng rng(12345);
    IsometryCheck chk;
    try {
      chk = verify_isometry(m, iso, 32, rng);
    } catch (const Error& e) {
      fail("isometry", e.what());
    }
    if (chk.max_distance_defect > 1e-8 || chk.max_metric_defect > 1e-8) fail("isometry", "is not an isometry of the manifold");
  }
  cfg.setting = Setting{m, iso};
  cfg.grid = read_grid(top.sub("grid"), m, cfg.energy_bound);
  if (top.has("flow")) cfg.flow = read_flow(top.sub("flow"));
  if (top.has("find")) cfg.find = read_find(top.sub("find"));
  if (top.has("iterate")) cfg.iterate = read_iterate(top.sub("iterate"));
  if (top.has("minimax")) cfg.minimax = read_minimax(top.sub("minimax"));
  if (top.has("bangert")) cfg.bangert = read_bangert(top.sub("bangert"));
  if (top.has("output")) {
    Section out = top.sub("output");
    cfg.out_dir = out.get<std::string>("dir", cfg.out_dir);
    out.finish();
  }
  top.finish();
  cfg.canonical = doc.dump();
  cfg.hash = fnv1a_hex(cfg.canonical);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace geolab
