#include "geolab/acceptance.hpp"
#include "geolab/commands.hpp"
#include "geolab/config.hpp"
#include "geolab/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace geolab;

int main(int argc, char** argv) {
  CLI::App app{"geolab: isometry-invariant geodesics on closed Riemannian manifolds"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<int> only;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
    if (config_required) opt->required();
    opt->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out_dir, "override the output directory");
  };
  for (const char* name : {"find", "iterate", "minimax", "bangert"}) add_common(app.add_subcommand(name), true);
  CLI::App* verify = app.add_subcommand("verify", "run the acceptance suite, one PASS/FAIL line per criterion");
  add_common(verify, false);
  verify->add_option("--only", only, "criterion numbers to run (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "verify") {
      std::uint64_t s = 20240601;
      if (!config_path.empty()) s = load_config(config_path).seed;
      if (seed) s = *seed;
      const auto results = run_acceptance(std::cout, only, s);
      int failed = 0;
      for (const auto& r : results) failed += !r.pass;
      std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
      return failed ? kExitAcceptance : kExitOk;
    }

    RunConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (cmd == "find") return cmd_find(cfg, std::cout);
    if (cmd == "iterate") return cmd_iterate(cfg, std::cout);
    if (cmd == "minimax") return cmd_minimax(cfg, std::cout);
    return cmd_bangert(cfg, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
