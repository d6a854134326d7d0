#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "scenario.hpp"
#include "vacsing/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vacsing: batch scenario runner for vacuum cosmological singularity checks"};
  app.set_version_flag("--version", std::string(vacsing::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir, report_csv;
  int threads = 1;
  std::vector<std::string> manifests;

  CLI::App* run = app.add_subcommand("run", "execute a scenario config");
  run->add_option("config", config_path, "scenario config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--threads", threads, "worker threads for independent norm solves")
      ->check(CLI::PositiveNumber);

  CLI::App* report = app.add_subcommand("report", "aggregate run manifests");
  report->add_option("manifests", manifests, "manifest.json paths")->required();
  report->add_option("--csv", report_csv, "also write the summary table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // usage problems map to exit code 2; --help/--version exit 0
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return vacsing::tools::run_scenario(config_path, out_dir, threads);
    return vacsing::tools::report_manifests(manifests, report_csv);
  } catch (const vacsing::tools::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
