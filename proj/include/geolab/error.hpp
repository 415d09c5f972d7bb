#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geolab {

enum class ErrorCode {
  PreViolation,
  OdeDivergence,
  GridMismatch,
  RadiusTooLarge,
  InconsistentPeriods,
  NotMultiple,
  SegmentTooLong,
  NewtonStall,
  NonIsolatedSuspected,
  NotCritical,
  VerticesTooFar,
  PeriodMismatch,
  IndexTooSmall,
  NoConvergence,
  MaxItersExceeded,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported through this type; the
/// code maps one-to-one onto the error names used in reports and exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace geolab
