#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace geolab {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  double seconds = 0.0;
  double limit_seconds = 0.0;  // 0 means no runtime limit
  std::string detail;
};

/// Runs the verification criteria (all when `only` is empty), printing one
/// PASS/FAIL line per criterion as it finishes. A criterion fails when its
/// check fails, when it throws, or when it exceeds its runtime limit.
std::vector<CriterionResult> run_acceptance(std::ostream& out, const std::vector<int>& only = {},
                                            std::uint64_t seed = 20240601);

}  // namespace geolab
