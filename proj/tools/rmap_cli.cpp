// Experiment driver: builds a problem from a config file, runs the chosen
// sampler, and writes chain/stats/manifest files whose names carry the
// config hash and the seed. Exit codes: 0 ok, 1 sampler/solver failure,
// 2 bad config or usage.
#include <CLI11.hpp>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "rmap/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rMAP experiment driver"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  bool force = false;
  bool have_seed = false;

  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("--config", config_path, "config file (key = value lines)")
      ->required();
  run->add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  run->add_option("--workers", workers, "override the config worker count");
  run->add_option("--out", out_dir,
                  "output directory (default: config `output`, then "
                  "$RMAP_OUTPUT_ROOT, then the current directory)");
  run->add_flag("--force", force, "overwrite existing output files");

  std::vector<std::string> chain_bases;
  CLI::App* compare = app.add_subcommand(
      "compare", "side-by-side report for two or more saved chains");
  compare->add_option("chains", chain_bases,
                      "chain base paths (without .meta.json)")
      ->expected(-2);

  CLI::App* check =
      app.add_subcommand("check", "run the derivative/oracle self-tests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      rmap::ExperimentConfig cfg = rmap::parse_config_file(config_path);
      if (have_seed) cfg.seed = seed;
      if (workers > 0) cfg.workers = workers;
      if (!out_dir.empty()) {
        cfg.output = out_dir;
      } else if (cfg.output.empty()) {
        const char* root = std::getenv("RMAP_OUTPUT_ROOT");
        if (root && *root) cfg.output = root;
      }
      rmap::RunResult res = rmap::run_experiment(cfg, force, std::cout);
      if (res.status != 0) {
        std::cerr << "run failed: " << res.error << "\n";
        return 1;
      }
      return 0;
    }
    if (compare->parsed()) {
      rmap::CompareReport rep = rmap::compare_chains(chain_bases);
      std::cout << rep.text;
      return 0;
    }
    if (check->parsed()) return rmap::run_self_checks(std::cout) ? 0 : 1;
  } catch (const rmap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
