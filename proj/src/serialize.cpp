#include "geolab/serialize.hpp"

#include "geolab/error.hpp"

#include <cmath>

namespace geolab {

namespace {

json point_to_json(const Point& p) {
  json a = json::array();
  a.push_back(static_cast<int>(p.chart));
  for (int i = 0; i < p.coords.size(); ++i) a.push_back(p.coords[i]);
  return a;
}

Point point_from_json(const json& a) {
  if (!a.is_array() || a.size() < 2 || a.size() > 5) throw Error(ErrorCode::PreViolation, "malformed node");
  Point p;
  const int chart = a[0].get<int>();
  if (chart < 0 || chart > static_cast<int>(ChartId::CircleSphere)) throw Error(ErrorCode::PreViolation, "unknown chart");
  p.chart = static_cast<ChartId>(chart);
  p.coords.resize(static_cast<Eigen::Index>(a.size()) - 1);
  for (std::size_t i = 1; i < a.size(); ++i) p.coords[static_cast<Eigen::Index>(i) - 1] = a[i].get<double>();
  return p;
}

}  // namespace

json loop_to_json(const BrokenLoop& loop) {
  json nodes = json::array();
  for (const Point& p : loop.nodes) nodes.push_back(point_to_json(p));
  return {{"grid", loop.grid->taus}, {"k_prime", loop.grid->k_prime}, {"nodes", nodes}};
}

BrokenLoop loop_from_json(const json& j) {
  TimeGrid g;
  g.taus = j.at("grid").get<std::vector<double>>();
  g.k_prime = j.at("k_prime").get<int>();
  g.validate();
  BrokenLoop loop{make_grid(std::move(g)), {}};
  for (const json& n : j.at("nodes")) loop.nodes.push_back(point_from_json(n));
  if (static_cast<int>(loop.nodes.size()) != loop.k()) throw Error(ErrorCode::GridMismatch, "node count differs from k");
  return loop;
}

json iterate_to_json(const IteratedLoop& it) {
  json nodes = json::array();
  for (const Point& p : it.nodes) nodes.push_back(point_to_json(p));
  return {{"nu", it.nu}, {"nodes", nodes}};
}

json record_to_json(const GeodesicRecord& rec) {
  return {{"kind", std::string(to_string(rec.kind))},
          {"energy", rec.energy},
          {"grad_norm", rec.grad_norm},
          {"index", rec.index},
          {"nullity", rec.nullity},
          {"kink_defect", rec.kink_defect},
          {"speed_defect", rec.speed_defect},
          {"length", rec.image_signature.length},
          {"loop", loop_to_json(rec.loop)}};
}

json spectrum_to_json(const SpectrumReport& sp, long long m) {
  const std::size_t n = std::min<std::size_t>(10, sp.eigenvalues.size());
  std::vector<double> low(sp.eigenvalues.begin(), sp.eigenvalues.begin() + static_cast<long>(n));
  return {{"m", m}, {"eigenvalues", low}, {"index", sp.index}, {"nullity", sp.nullity}};
}

json scan_to_json(const DichotomyScan& scan) {
  json entries = json::array();
  for (const ScanEntry& e : scan.entries) {
    json s = spectrum_to_json(e.spectrum, e.m);
    s["q_prime"] = std::to_string(e.q_prime.numerator()) + "/" + std::to_string(e.q_prime.denominator());
    entries.push_back(std::move(s));
  }
  return {{"verdict", std::string(to_string(scan.verdict))}, {"threshold", scan.threshold}, {"entries", entries}};
}

json family_to_json(const LoopFamily& family) {
  json out = json::array();
  for (std::size_t i = 0; i < family.size(); ++i) {
    std::vector<double> p(family.params[i].data(), family.params[i].data() + family.params[i].size());
    out.push_back({{"params", p}, {"boundary", static_cast<bool>(family.boundary[i])}, {"loop", loop_to_json(family.curves[i])}});
  }
  return out;
}

LoopFamily family_from_json(const json& j) {
  LoopFamily f;
  for (const json& e : j) {
    const auto p = e.at("params").get<std::vector<double>>();
    f.params.push_back(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
    f.boundary.push_back(e.at("boundary").get<bool>());
    f.curves.push_back(loop_from_json(e.at("loop")));
  }
  f.dim = f.params.empty() ? 1 : static_cast<int>(f.params.front().size());
  return f;
}

void require_finite(const json& j, const std::string& where) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) throw Error(ErrorCode::NoConvergence, "non-finite value at " + where);
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) require_finite(*it, where + "." + it.key());
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) require_finite(j[i], where + "[" + std::to_string(i) + "]");
  }
}

}  // namespace geolab
