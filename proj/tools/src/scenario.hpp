#ifndef VACSING_TOOLS_SCENARIO_HPP
#define VACSING_TOOLS_SCENARIO_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace vacsing::tools {

// schema violation: carries the config path/key and the reason
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Executes one scenario config; returns the process exit code
// (0 all verdicts pass, 1 verdict failure, 2 usage/config).
int run_scenario(const std::string& config_path, const std::string& out_override, int threads);

// Aggregates manifests into a summary table (text to stdout, CSV to csv_path
// when nonempty); verifies the content digests of every listed file.
int report_manifests(const std::vector<std::string>& paths, const std::string& csv_path);

}  // namespace vacsing::tools

#endif
