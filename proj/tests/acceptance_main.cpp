#include "geolab/acceptance.hpp"
#include "geolab/commands.hpp"

#include <iostream>

int main() {
  const auto results = geolab::run_acceptance(std::cout);
  int failed = 0;
  for (const auto& r : results) failed += !r.pass;
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
  return failed ? geolab::kExitAcceptance : geolab::kExitOk;
}
