#include "geolab/morse.hpp"

#include "geolab/chain.hpp"
#include "geolab/error.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace geolab {

SpectrumReport analyze_spectrum(const Eigen::MatrixXd& hessian, double relative_tol) {
  SpectrumReport out;
  if (hessian.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (hessian + hessian.transpose()), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  out.eigenvalues.assign(lambda.data(), lambda.data() + lambda.size());
  out.null_tol = relative_tol * lambda.cwiseAbs().maxCoeff();
  for (double l : out.eigenvalues) {
    if (l < -out.null_tol) {
      ++out.index;
    } else if (l <= out.null_tol) {
      ++out.nullity;
    }
  }
  return out;
}

SpectrumReport discrete_hessian(const Setting& s, const GeodesicRecord& record, const PeriodData& pd,
                                bool rescaled_period, double critical_tol) {
  if (!(record.grad_norm < critical_tol)) throw Error(ErrorCode::NotCritical, "record is not a critical point");
  IteratedLoop it = iterate_embedding(record.loop, pd);
  if (rescaled_period) {
    const double total = it.period();
    for (double& t : it.nu) t /= total;
  }
  return analyze_spectrum(Chain::for_iterate(s, it).hessian());
}

namespace {

using JacobiState = std::array<double, 8>;  // x(3), v(3), J, J'

}  // namespace

int jacobi_conjugate_count(const Manifold& m, const Tangent& unit_velocity, double length) {
  if (m.dimension() != 2) throw Error(ErrorCode::PreViolation, "the Jacobi oracle covers surfaces only");
  Eigen::Vector3d inv_sq = Eigen::Vector3d::Zero();
  const bool flat = m.kind() == ModelKind::FlatTorus;
  if (m.kind() == ModelKind::RoundSphere) {
    const double r = std::get<SphereModel>(m.model()).radius;
    inv_sq.setConstant(1.0 / (r * r));
  } else if (m.kind() == ModelKind::TriaxialEllipsoid) {
    inv_sq = std::get<EllipsoidModel>(m.model()).axes.cwiseInverse().cwiseAbs2();
  }
  const ChartId chart = unit_velocity.base.chart;
  const int amb = m.ambient_dimension();

  auto rhs = [&](const JacobiState& y, JacobiState& dy, double) {
    const Eigen::Vector3d x(y[0], y[1], y[2]);
    const Eigen::Vector3d v(y[3], y[4], y[5]);
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    double curvature = 0.0;
    if (!flat) {
      const Eigen::Vector3d ax = inv_sq.cwiseProduct(x);
      acc = -(v.dot(inv_sq.cwiseProduct(v)) / ax.squaredNorm()) * ax;
      curvature = m.gaussian_curvature(Point{chart, Vec(x)});
    }
    for (int i = 0; i < 3; ++i) {
      dy[static_cast<std::size_t>(i)] = v[i];
      dy[static_cast<std::size_t>(i) + 3] = acc[i];
    }
    dy[6] = y[7];
    dy[7] = -curvature * y[6];
  };

  JacobiState y{};
  for (int i = 0; i < amb; ++i) {
    y[static_cast<std::size_t>(i)] = unit_velocity.base.coords[i];
    y[static_cast<std::size_t>(i) + 3] = unit_velocity.components[i];
  }
  y[6] = 0.0;
  y[7] = 1.0;

  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_dense_output(1e-12, 1e-12, ode::runge_kutta_dopri5<JacobiState>());
  const double eps = 1e-6 * length;
  const int samples = 20000;
  int count = 0;
  double prev = 0.0;
  bool have_prev = false;
  ode::integrate_n_steps(stepper, rhs, y, 0.0, length / samples, samples, [&](const JacobiState& st, double t) {
    if (t < eps || t > length - eps) return;
    if (have_prev && ((prev < 0.0) != (st[6] < 0.0))) ++count;
    prev = st[6];
    have_prev = true;
  });
  if (!std::isfinite(y[6])) throw Error(ErrorCode::OdeDivergence, "Jacobi integration diverged");
  return count;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::AllZero: return "ALL_ZERO";
    case Verdict::Growing: return "GROWING";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

DichotomyScan dichotomy_scan(const Setting& s, const GeodesicRecord& record, const Rational& p, const Rational& q,
                             long long m_max, int threshold) {
  DichotomyScan scan;
  scan.threshold = threshold >= 0 ? threshold : 2 * s.manifold.dimension();
  const auto classes = residue_partition(p, q, 1, m_max);
  const double own_qp = record.loop.grid->q_prime();
  for (const auto& [qp, ms] : classes) {
    if (std::abs(to_double(qp) - own_qp) > 1e-12 * std::max(1.0, to_double(q))) continue;
    for (long long m : ms) {
      const PeriodData pd{p, q, qp, m};
      scan.entries.push_back({m, qp, discrete_hessian(s, record, pd)});
    }
  }
  if (scan.entries.empty()) return scan;
  bool all_zero = true;
  bool nondecreasing = true;
  for (std::size_t i = 0; i < scan.entries.size(); ++i) {
    all_zero = all_zero && scan.entries[i].spectrum.index == 0;
    if (i > 0) nondecreasing = nondecreasing && scan.entries[i].spectrum.index >= scan.entries[i - 1].spectrum.index;
  }
  if (all_zero) {
    scan.verdict = Verdict::AllZero;
  } else if (nondecreasing && scan.entries.back().spectrum.index > scan.threshold) {
    scan.verdict = Verdict::Growing;
  }
  return scan;
}

}  // namespace geolab
