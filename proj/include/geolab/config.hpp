#pragma once

#include "geolab/flows.hpp"
#include "geolab/homotopy.hpp"
#include "geolab/loopspace.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace geolab {

inline constexpr int kSchemaVersion = 1;

struct FindParams {
  int starts = 64;
  /// random | rotation_orbit | torus_line | great_circle
  std::string start = "random";
  double noise = 0.05;
  bool descend_first = true;
  std::array<int, 2> winding{1, 0};
  double dedup_tol = 1e-3;
};

struct IterateParams {
  Rational p{1};
  Rational q{1};
  long long m_max = 10;
  /// great_circle | torus_line | constant: the start refined into the scanned record.
  std::string record = "great_circle";
  std::array<int, 2> winding{1, 0};
  int threshold = -1;
};

struct MinimaxParams {
  /// ellipsoid_sweep | torus_translates | latitude_sweep
  std::string family = "ellipsoid_sweep";
  int samples = 256;
  std::array<double, 3> tilt{0.3, 0.2, 1.0};
  std::array<int, 2> winding{1, 0};
  MinimaxConfig cfg;
};

struct BangertParams {
  /// torus_circle | sphere_latitude | constant
  std::string family = "torus_circle";
  std::vector<int> ms{2, 4, 8, 16};
  double radius = 0.2;
  int samples = 65;
  int x_per_slot = 16;
};

/// A validated run configuration. The grid passes the spacing bound for the
/// configured energy bound before any command runs.
struct RunConfig {
  std::string canonical;  // compact JSON of the parsed document
  std::string hash;       // FNV-1a of `canonical`, hex
  std::uint64_t seed = 0;
  Setting setting{Manifold::round_sphere(), Isometry::identity()};
  GridPtr grid;
  double energy_bound = 0.0;
  FlowConfig flow;
  FindParams find;
  IterateParams iterate;
  MinimaxParams minimax;
  BangertParams bangert;
  std::string out_dir = "out";
};

/// Throws CONFIG_ERROR naming the offending field (or line, for syntax errors).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

std::string fnv1a_hex(const std::string& text);

}  // namespace geolab
