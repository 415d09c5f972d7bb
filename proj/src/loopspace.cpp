#include "geolab/loopspace.hpp"

#include "geolab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace geolab {

// ------------------------------------------------------------------ grids

double TimeGrid::max_spacing() const {
  double out = 0.0;
  for (int i = 0; i < k(); ++i) out = std::max(out, spacing(i));
  return out;
}

double TimeGrid::spacing_limit(double injrad, double q, double energy_bound) {
  return injrad * injrad / (9.0 * q * energy_bound);
}

bool TimeGrid::satisfies_spacing_bound(double injrad, double energy_bound) const {
  return max_spacing() < spacing_limit(injrad, q(), energy_bound);
}

TimeGrid TimeGrid::uniform(int k, double q) { return pinned(k, q, 0.0); }

TimeGrid TimeGrid::pinned(int k, double q, double q_prime) {
  if (k < 2) throw Error(ErrorCode::PreViolation, "a time grid needs k >= 2");
  if (!(q > 0.0) || q_prime < 0.0 || q_prime >= q) {
    throw Error(ErrorCode::PreViolation, "grid requires q > 0 and q' in [0, q)");
  }
  TimeGrid g;
  g.taus.resize(static_cast<std::size_t>(k) + 1);
  if (q_prime == 0.0) {
    for (int i = 0; i <= k; ++i) g.taus[static_cast<std::size_t>(i)] = q * i / k;
    g.k_prime = 0;
  } else {
    const int kp = std::clamp(static_cast<int>(std::lround(q_prime / q * k)), 1, k - 1);
    for (int i = 0; i <= kp; ++i) g.taus[static_cast<std::size_t>(i)] = q_prime * i / kp;
    for (int i = kp + 1; i <= k; ++i) {
      g.taus[static_cast<std::size_t>(i)] = q_prime + (q - q_prime) * (i - kp) / (k - kp);
    }
    g.k_prime = kp;
  }
  g.taus.back() = q;
  return g;
}

TimeGrid TimeGrid::automatic(double q, double q_prime, double injrad, double energy_bound) {
  const double limit = spacing_limit(injrad, q, energy_bound);
  for (int k = 2; k <= 1 << 20; k += 2) {
    TimeGrid g = pinned(k, q, q_prime);
    if (1.2 * g.max_spacing() < limit) return g;
  }
  throw Error(ErrorCode::PreViolation, "no admissible grid for this energy bound");
}

void TimeGrid::validate() const {
  if (taus.size() < 3 || taus.front() != 0.0) throw Error(ErrorCode::PreViolation, "grid must start at 0 with k >= 2");
  for (std::size_t i = 1; i < taus.size(); ++i) {
    if (!(taus[i] > taus[i - 1])) throw Error(ErrorCode::PreViolation, "grid must be strictly increasing");
  }
  if (k_prime < 0 || k_prime >= k()) throw Error(ErrorCode::PreViolation, "k' must lie in {0,...,k-1}");
}

GridPtr make_grid(TimeGrid grid) {
  grid.validate();
  return std::make_shared<const TimeGrid>(std::move(grid));
}

// --------------------------------------------------------------- energies

std::vector<double> interval_energies(const Manifold& m, const BrokenLoop& loop) {
  const TimeGrid& g = *loop.grid;
  std::vector<double> out(static_cast<std::size_t>(g.k()));
  for (int i = 0; i < g.k(); ++i) {
    const double d = m.dist(loop.at(i), loop.at(i + 1));
    out[static_cast<std::size_t>(i)] = d * d / g.spacing(i);
  }
  return out;
}

namespace {

long double partial_sum(const Manifold& m, const BrokenLoop& loop, int upto) {
  const TimeGrid& g = *loop.grid;
  long double sum = 0.0L;
  for (int i = 0; i < upto; ++i) {
    const long double d = m.dist(loop.at(i), loop.at(i + 1));
    sum += d * d / static_cast<long double>(g.spacing(i));
  }
  return sum;
}

void require_same_grid(const BrokenLoop& a, const BrokenLoop& b) {
  if (a.grid != b.grid && !(*a.grid == *b.grid)) throw Error(ErrorCode::GridMismatch, "loops live on different grids");
  if (a.nodes.size() != b.nodes.size()) throw Error(ErrorCode::GridMismatch, "node counts differ");
}

}  // namespace

double energy_Fq(const Manifold& m, const BrokenLoop& loop) {
  return static_cast<double>(partial_sum(m, loop, loop.k()) / static_cast<long double>(loop.grid->q()));
}

double energy_Fq_prime(const Manifold& m, const BrokenLoop& loop) {
  const TimeGrid& g = *loop.grid;
  if (g.k_prime == 0) return 0.0;
  return static_cast<double>(partial_sum(m, loop, g.k_prime) / static_cast<long double>(g.q_prime()));
}

double max_segment_length(const Manifold& m, const BrokenLoop& loop) {
  double out = 0.0;
  for (int i = 0; i < loop.k(); ++i) out = std::max(out, m.dist(loop.at(i), loop.at(i + 1)));
  return out;
}

// ------------------------------------------------------------- constraint

double constraint_residual(const Setting& s, const BrokenLoop& loop) {
  const Point image = s.isometry.apply(s.manifold, loop.at(0));
  return s.manifold.dist(image, loop.at(loop.grid->k_prime));
}

void project_constraint(const Setting& s, BrokenLoop& loop, double tol) {
  const int kp = loop.grid->k_prime;
  if (kp == 0) return;
  if (constraint_residual(s, loop) > tol) loop.at(kp) = s.isometry.apply(s.manifold, loop.at(0));
}

void validate_loop(const Setting& s, const BrokenLoop& loop, double tol) {
  if (!loop.grid) throw Error(ErrorCode::PreViolation, "loop has no grid");
  if (static_cast<int>(loop.nodes.size()) != loop.k()) throw Error(ErrorCode::PreViolation, "node count must equal k");
  for (const Point& p : loop.nodes) {
    if (!s.manifold.contains(p, 1e-8)) throw Error(ErrorCode::PreViolation, "node off the manifold");
  }
  if (constraint_residual(s, loop) > tol) throw Error(ErrorCode::PreViolation, "invariance constraint violated");
  if (max_segment_length(s.manifold, loop) >= s.manifold.injrad()) {
    throw Error(ErrorCode::PreViolation, "segment longer than the injectivity radius");
  }
}

// ---------------------------------------------------------------- metric

double dist_upsilon(const Manifold& m, const BrokenLoop& a, const BrokenLoop& b) {
  require_same_grid(a, b);
  double out = 0.0;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) out = std::max(out, m.dist(a.nodes[i], b.nodes[i]));
  return out;
}

bool in_polydisc(const Manifold& m, const BrokenLoop& center, double r, const BrokenLoop& candidate) {
  if (r > m.convexity_radius()) throw Error(ErrorCode::RadiusTooLarge, "polydisc radius exceeds the convexity radius");
  return dist_upsilon(m, center, candidate) < r;
}

BrokenLoop interpolate_loops(const Setting& s, const BrokenLoop& a, const BrokenLoop& b, double t) {
  require_same_grid(a, b);
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  const Manifold& m = s.manifold;
  BrokenLoop out{a.grid, {}};
  out.nodes.reserve(a.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    if (m.dist(a.nodes[i], b.nodes[i]) >= m.injrad()) {
      throw Error(ErrorCode::PreViolation, "interpolation needs dist_upsilon < injrad");
    }
    out.nodes.push_back(m.geodesic_between(a.nodes[i], b.nodes[i], t));
  }
  project_constraint(s, out);
  return out;
}

Point loop_at_time(const Manifold& m, const BrokenLoop& loop, double t) {
  const TimeGrid& g = *loop.grid;
  double u = std::fmod(t, g.q());
  if (u < 0.0) u += g.q();
  auto it = std::upper_bound(g.taus.begin(), g.taus.end(), u);
  int i = static_cast<int>(it - g.taus.begin()) - 1;
  i = std::clamp(i, 0, g.k() - 1);
  const double frac = (u - g.taus[static_cast<std::size_t>(i)]) / g.spacing(i);
  return m.geodesic_between(loop.at(i), loop.at(i + 1), std::clamp(frac, 0.0, 1.0));
}

BrokenLoop time_shift(const Manifold& m, const BrokenLoop& loop, double shift) {
  BrokenLoop out{loop.grid, {}};
  out.nodes.reserve(loop.nodes.size());
  for (int i = 1; i <= loop.k(); ++i) out.nodes.push_back(loop_at_time(m, loop, loop.grid->taus[static_cast<std::size_t>(i)] + shift));
  return out;
}

// ------------------------------------------------------------- rationals

double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

Rational rational_mod(const Rational& r, const Rational& q) {
  const Rational ratio = r / q;
  long long fl = ratio.numerator() / ratio.denominator();
  if (ratio.numerator() < 0 && ratio.numerator() % ratio.denominator() != 0) --fl;
  return r - q * Rational(fl);
}

Rational parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      return Rational(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) return Rational(std::stoll(text));
    const std::string frac = text.substr(dot + 1);
    long long den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const std::string digits = text.substr(0, dot) + frac;
    return Rational(std::stoll(digits), den);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::ConfigError, "not a rational number: '" + text + "'");
  }
}

void PeriodData::validate() const {
  if (p <= Rational(0) || q <= Rational(0)) throw Error(ErrorCode::NotMultiple, "periods must be positive");
  if ((q / p).denominator() != 1) throw Error(ErrorCode::NotMultiple, "q must be an integer multiple of p");
  if (m < 0) throw Error(ErrorCode::InconsistentPeriods, "iterate order must be non-negative");
  if (q_prime < Rational(0) || q_prime >= q) throw Error(ErrorCode::InconsistentPeriods, "q' must lie in [0, q)");
  if (rational_mod(iterate_period(), q) != q_prime) {
    throw Error(ErrorCode::InconsistentPeriods, "mp+1 is not congruent to q' mod q");
  }
}

PeriodData PeriodData::for_order(Rational p, Rational q, long long m) {
  PeriodData pd{p, q, Rational(0), m};
  if (p <= Rational(0) || q <= Rational(0) || (q / p).denominator() != 1) {
    throw Error(ErrorCode::NotMultiple, "q must be a positive integer multiple of p");
  }
  pd.q_prime = rational_mod(pd.iterate_period(), q);
  return pd;
}

std::map<Rational, std::vector<long long>> residue_partition(const Rational& p, const Rational& q, long long m_lo,
                                                             long long m_hi) {
  if (p <= Rational(0) || q <= Rational(0) || (q / p).denominator() != 1) {
    throw Error(ErrorCode::NotMultiple, "q must be a positive integer multiple of p");
  }
  std::map<Rational, std::vector<long long>> out;
  for (long long m = m_lo; m <= m_hi; ++m) out[rational_mod(Rational(m) * p + Rational(1), q)].push_back(m);
  return out;
}

// -------------------------------------------------------------- iterates

IteratedLoop iterate_embedding(const BrokenLoop& loop, const PeriodData& pd) {
  pd.validate();
  const TimeGrid& g = *loop.grid;
  const double q = to_double(pd.q);
  if (std::abs(g.q() - q) > 1e-12 * q || std::abs(g.q_prime() - to_double(pd.q_prime)) > 1e-12 * q) {
    throw Error(ErrorCode::InconsistentPeriods, "loop grid does not carry (q, q') of the period data");
  }
  const Rational total = pd.iterate_period();
  if (total < pd.q) throw Error(ErrorCode::InconsistentPeriods, "iterate period mp+1 must be at least q");
  const Rational ratio = total / pd.q;
  const long long copies = ratio.numerator() / ratio.denominator();

  IteratedLoop it;
  const std::size_t count = static_cast<std::size_t>(copies * g.k() + g.k_prime) + 1;
  it.nu.reserve(count);
  it.nodes.reserve(count);
  for (long long h = 0; h < copies; ++h) {
    for (int i = 0; i < g.k(); ++i) {
      it.nu.push_back(static_cast<double>(h) * q + g.taus[static_cast<std::size_t>(i)]);
      it.nodes.push_back(loop.at(i));
    }
  }
  for (int i = 0; i <= g.k_prime; ++i) {
    it.nu.push_back(static_cast<double>(copies) * q + g.taus[static_cast<std::size_t>(i)]);
    it.nodes.push_back(loop.at(i));
  }
  it.nu.back() = to_double(total);
  return it;
}

double iterated_energy(const Manifold& m, const IteratedLoop& it) {
  long double sum = 0.0L;
  for (int j = 0; j < it.segment_count(); ++j) {
    const long double d = m.dist(it.nodes[static_cast<std::size_t>(j)], it.nodes[static_cast<std::size_t>(j) + 1]);
    sum += d * d / static_cast<long double>(it.nu[static_cast<std::size_t>(j) + 1] - it.nu[static_cast<std::size_t>(j)]);
  }
  return static_cast<double>(sum / static_cast<long double>(it.period()));
}

EnergyIdentity iterated_energy_identity_check(const Manifold& m, const BrokenLoop& loop, const PeriodData& pd) {
  const IteratedLoop it = iterate_embedding(loop, pd);
  EnergyIdentity out;
  out.lhs = iterated_energy(m, it);
  const long double fq = energy_Fq(m, loop);
  const long double fqp = energy_Fq_prime(m, loop);
  const long double qp = to_double(pd.q_prime);
  const long double total = to_double(pd.iterate_period());
  out.rhs = static_cast<double>(fq + qp / total * (fqp - fq));
  out.residual = std::abs(out.lhs - out.rhs);
  return out;
}

// ------------------------------------------------------------------ images

ImageSignature image_signature(const Manifold& m, const BrokenLoop& loop, int per_segment) {
  ImageSignature sig;
  for (int i = 0; i < loop.k(); ++i) {
    const Point& a = loop.at(i);
    const Point& b = loop.at(i + 1);
    sig.length += m.dist(a, b);
    for (int j = 0; j < per_segment; ++j) sig.samples.push_back(m.geodesic_between(a, b, static_cast<double>(j) / per_segment));
  }
  return sig;
}

namespace {

double sample_distance(const Manifold& m, const Point& a, const Point& b) {
  if (m.kind() == ModelKind::TriaxialEllipsoid) return (a.coords - b.coords).norm();
  return m.dist(a, b);
}

/// Distance from p to the sampled segment a-b of an image.
double segment_distance(const Manifold& m, const Point& p, const Point& a, const Point& b) {
  if (m.kind() == ModelKind::TriaxialEllipsoid) {
    const Eigen::Vector3d d = b.coords - a.coords;
    const double t = d.squaredNorm() > 0.0 ? std::clamp(d.dot(p.coords - a.coords) / d.squaredNorm(), 0.0, 1.0) : 0.0;
    return (a.coords + t * d - p.coords).norm();
  }
  // Golden-section search along the short geodesic; the distance is unimodal on it.
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  auto f = [&](double t) { return m.dist(p, m.geodesic_between(a, b, t)); };
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 30; ++i) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f1, f2, m.dist(p, a), m.dist(p, b)});
}

/// Largest distance from a sample of `a` to the closed sampled curve `b`.
double directed_hausdorff(const Manifold& m, const ImageSignature& a, const ImageSignature& b) {
  const std::size_t n = b.samples.size();
  double out = 0.0;
  for (const Point& p : a.samples) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t at = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = sample_distance(m, p, b.samples[j]);
      if (d < best) {
        best = d;
        at = j;
      }
    }
    if (n > 1) {
      const Point& prev = b.samples[(at + n - 1) % n];
      const Point& next = b.samples[(at + 1) % n];
      best = std::min({best, segment_distance(m, p, prev, b.samples[at]), segment_distance(m, p, b.samples[at], next)});
    }
    out = std::max(out, best);
  }
  return out;
}

}  // namespace

double image_distance(const Manifold& m, const ImageSignature& a, const ImageSignature& b) {
  return std::max(directed_hausdorff(m, a, b), directed_hausdorff(m, b, a));
}

std::string_view to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::Constant: return "constant";
    case RecordKind::Kinked: return "kinked";
    case RecordKind::Geodesic: return "geodesic";
  }
  return "?";
}

Eigen::Vector2i torus_winding(const Manifold& m, const BrokenLoop& loop) {
  if (m.kind() != ModelKind::FlatTorus) throw Error(ErrorCode::PreViolation, "winding vectors are defined on the torus");
  Eigen::Vector2d total = Eigen::Vector2d::Zero();
  for (int i = 0; i < loop.k(); ++i) {
    const Vec v = m.log(loop.at(i), loop.at(i + 1)).components;
    total += Eigen::Vector2d(v[0], v[1]);
  }
  const Eigen::Vector2d u = std::get<TorusModel>(m.model()).lattice.partialPivLu().solve(total);
  return Eigen::Vector2i(static_cast<int>(std::lround(u[0])), static_cast<int>(std::lround(u[1])));
}

}  // namespace geolab
