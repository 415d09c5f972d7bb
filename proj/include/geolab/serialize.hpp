#pragma once

#include "geolab/homotopy.hpp"
#include "geolab/loopspace.hpp"
#include "geolab/morse.hpp"

#include <json.hpp>

namespace geolab {

using nlohmann::json;

/// {"grid": [tau...], "k_prime": k', "nodes": [[chart, coords...], ...]}
json loop_to_json(const BrokenLoop& loop);
BrokenLoop loop_from_json(const json& j);

json iterate_to_json(const IteratedLoop& it);

json record_to_json(const GeodesicRecord& rec);
/// {m, eigenvalues (lowest ten), index, nullity}
json spectrum_to_json(const SpectrumReport& sp, long long m);
json scan_to_json(const DichotomyScan& scan);

/// Array of {"params": [...], "boundary": bool, "loop": {...}}.
json family_to_json(const LoopFamily& family);
LoopFamily family_from_json(const json& j);

/// Throws NO_CONVERGENCE naming the first non-finite number.
void require_finite(const json& j, const std::string& where = "output");

}  // namespace geolab
