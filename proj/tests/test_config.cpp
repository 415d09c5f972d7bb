#include "geolab/commands.hpp"
#include "geolab/config.hpp"
#include "geolab/error.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace geolab;

namespace {

const char* kTorus = R"({
  "schema_version": 1,
  "seed": 9,
  "manifold": {"kind": "torus"},
  "grid": {"k": 32, "q": 1, "energy_bound": 0.5},
  "bangert": {"family": "torus_circle", "ms": [2, 4], "radius": 0.2, "samples": 17, "x_per_slot": 4}
})";

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  return "";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("geolab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("a minimal configuration takes the defaults") {
  const RunConfig c = parse_config(kTorus);
  CHECK(c.seed == 9);
  CHECK(c.grid->k() == 32);
  CHECK(c.setting.manifold.kind() == ModelKind::FlatTorus);
  CHECK(c.find.starts == 64);
  CHECK(c.hash.size() == 16);
  CHECK(c.hash == parse_config(kTorus).hash);
  std::string other = kTorus;
  other.replace(other.find("\"seed\": 9"), 9, "\"seed\": 8");
  CHECK(parse_config(other).hash != c.hash);
}

TEST_CASE("configuration errors name the field or line") {
  CHECK(config_error(R"({"schema_version": 1, "manifold": {"kind": "torus", "colour": 2}, "grid": {"k": 64, "energy_bound": 0.3}})")
            .find("manifold.colour: unknown key") != std::string::npos);
  CHECK(config_error("{\n\"schema_version\": 1,\n\"grid\": {\"k\": 8 \"q\": 1}\n}").find("line 3") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 2, "manifold": {"kind": "torus"}, "grid": {"k": 64, "energy_bound": 0.3}})")
            .find("schema_version") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "manifold": {"kind": "torus"}, "grid": {"k": 8}})")
            .find("grid.energy_bound") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "manifold": {"kind": "sphere"}, "grid": {"k": 32, "energy_bound": 45}})")
            .find("grid.k") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "manifold": {"kind": "sphere"}, "isometry": {"kind": "translation", "shift": [0.1, 0]}, "grid": {"k": 64, "energy_bound": 1}})")
            .find("isometry") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "manifold": {"kind": "torus"}, "grid": {"k": 64, "energy_bound": 0.3}, "find": {"start": "spiral"}})")
            .find("find.start") != std::string::npos);
  CHECK(config_error(R"({"schema_version": 1, "manifold": {"kind": "torus"}, "grid": {"k": 64, "energy_bound": 0.3}, "minimax": {"samples": "many"}})")
            .find("minimax.samples") != std::string::npos);
}

TEST_CASE("automatic grids satisfy the spacing bound") {
  const RunConfig c = parse_config(
      R"({"schema_version": 1, "manifold": {"kind": "sphere"}, "isometry": {"kind": "rotation", "axis": [0, 0, 1], "angle": 1.0},
          "grid": {"k": "auto", "q_prime": 0.15915494309189535, "energy_bound": 45}})");
  CHECK(c.grid->satisfies_spacing_bound(c.setting.manifold.injrad(), 45.0));
  CHECK(c.grid->q_prime() == doctest::Approx(0.15915494309189535).epsilon(1e-15));
}

TEST_CASE("command outputs carry the config hash and seed and are reproducible") {
  RunConfig c = parse_config(kTorus);
  c.out_dir = scratch("bangert").string();
  std::ostringstream log;
  REQUIRE(cmd_bangert(c, log) == kExitOk);
  const auto doc = nlohmann::json::parse(slurp(std::filesystem::path(c.out_dir) / "bangert.json"));
  CHECK(doc.at("config_hash") == c.hash);
  CHECK(doc.at("seed") == 9);
  CHECK(doc.at("table").size() == 2);
  const std::string csv = slurp(std::filesystem::path(c.out_dir) / "bangert_table.csv");
  CHECK(csv.find("config_hash=" + c.hash) != std::string::npos);
  CHECK(csv.find("m,delta,m_delta") != std::string::npos);

  const std::string first = slurp(std::filesystem::path(c.out_dir) / "bangert.json");
  REQUIRE(cmd_bangert(c, log) == kExitOk);
  CHECK(slurp(std::filesystem::path(c.out_dir) / "bangert.json") == first);
}

TEST_CASE("find groups flat torus translates into one class") {
  RunConfig c = parse_config(
      R"({"schema_version": 1, "seed": 3, "manifold": {"kind": "torus"}, "grid": {"k": 20, "energy_bound": 0.5},
          "find": {"starts": 6, "start": "torus_line", "winding": [1, 0], "noise": 0.02}})");
  const FindReport rep = run_find(c);
  CHECK(rep.failures.empty());
  REQUIRE(rep.classes.size() == 1);
  CHECK(rep.classes.front().count == 6);
  CHECK(rep.classes.front().record.energy == doctest::Approx(1.0).epsilon(1e-9));
  // Starts are seeded individually, so the batch is reproducible.
  const FindReport again = run_find(c);
  REQUIRE(again.converged.size() == rep.converged.size());
  for (std::size_t i = 0; i < rep.converged.size(); ++i) CHECK(again.converged[i].energy == rep.converged[i].energy);
}

TEST_CASE("find on the ellipsoid by pure descent only reaches point curves") {
  RunConfig c = parse_config(
      R"({"schema_version": 1, "seed": 4, "manifold": {"kind": "ellipsoid", "axes": [1.0, 1.1, 1.2]},
          "grid": {"k": 12, "energy_bound": 4}, "find": {"starts": 3, "start": "random", "noise": 0.05}})");
  const FindReport rep = run_find(c);
  CHECK(rep.failures.empty());
  CHECK(rep.geodesics.empty());
  CHECK_FALSE(rep.constants.empty());
}

#ifdef GEOLAB_CLI
namespace {
int run_cli(const std::string& args) {
  const int status = std::system((std::string(GEOLAB_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST_CASE("command line exit codes") {
  const auto dir = scratch("cli");
  {
    std::ofstream(dir / "ok.json") << kTorus;
    std::ofstream(dir / "bad.json") << R"({"schema_version": 1, "manifold": {"kind": "torus"}, "grid": {"k": 64, "energy_bound": 0.3}, "extra": 1})";
    std::ofstream(dir / "noncritical.json")
        << R"({"schema_version": 1, "manifold": {"kind": "ellipsoid", "axes": [1, 1.1, 1.2]}, "grid": {"k": 16, "energy_bound": 4},
              "iterate": {"record": "great_circle", "m_max": 2}, "flow": {"newton_iters": 1}})";
  }
  CHECK(run_cli("bangert --config " + (dir / "ok.json").string() + " --out " + (dir / "out").string()) == kExitOk);
  CHECK(std::filesystem::exists(dir / "out" / "bangert.json"));
  CHECK(run_cli("bangert --config " + (dir / "bad.json").string()) == kExitConfig);
  CHECK(run_cli("find") == kExitConfig);
  CHECK(run_cli("iterate --config " + (dir / "noncritical.json").string() + " --out " + (dir / "out").string()) ==
        kExitNumerical);
  CHECK(run_cli("verify --only 10") == kExitOk);
}
#endif
