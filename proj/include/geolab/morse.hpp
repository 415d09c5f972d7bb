#pragma once

#include "geolab/loopspace.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace geolab {

struct SpectrumReport {
  std::vector<double> eigenvalues;  // ascending
  int index = 0;
  int nullity = 0;
  double null_tol = 0.0;
  int dimension() const { return static_cast<int>(eigenvalues.size()); }
};

/// Index and nullity with the relative threshold 1e-6 * max|lambda|.
SpectrumReport analyze_spectrum(const Eigen::MatrixXd& hessian, double relative_tol = 1e-6);

/// Constrained Hessian of E^{mp+1} at the iterate of a critical record.
/// With rescaled_period the iterate is reparametrised to unit period first,
/// which multiplies the Hessian by (mp+1)^2 and must leave index and nullity
/// unchanged. Throws NOT_CRITICAL unless record.grad_norm < critical_tol.
SpectrumReport discrete_hessian(const Setting& s, const GeodesicRecord& record, const PeriodData& pd,
                                bool rescaled_period = false, double critical_tol = 1e-8);

/// Zeros in (0, length) of the Jacobi field J'' + K J = 0, J(0) = 0, J'(0) = 1,
/// along the unit-speed geodesic t -> exp(x, t v) of a two-dimensional model.
int jacobi_conjugate_count(const Manifold& m, const Tangent& unit_velocity, double length);

enum class Verdict { AllZero, Growing, Inconclusive };

std::string_view to_string(Verdict v);

struct ScanEntry {
  long long m = 0;
  Rational q_prime{0};
  SpectrumReport spectrum;
};

struct DichotomyScan {
  std::vector<ScanEntry> entries;
  Verdict verdict = Verdict::Inconclusive;
  int threshold = 0;
};

/// Indices of the iterates for m = 1..m_max in the residue class of the
/// record's own q'. GROWING needs nondecreasing indices ending above
/// threshold (default 2 * dim M).
DichotomyScan dichotomy_scan(const Setting& s, const GeodesicRecord& record, const Rational& p, const Rational& q,
                             long long m_max, int threshold = -1);

}  // namespace geolab
