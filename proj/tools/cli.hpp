#pragma once

#include "shaplm/bench.hpp"
#include "shaplm/shaplm.hpp"
#include "shaplm/simulate.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace shaplm::cli {

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2 };

/// Default flat configuration of a subcommand (simulate, fit, eval, bench).
nlohmann::json default_config(const std::string& command);

/// Defaults, then the config file, then `--key value` flags. A flag value is
/// read as JSON when it parses and as a plain string otherwise. Unknown keys
/// are rejected.
nlohmann::json resolve_config(const std::string& command, const nlohmann::json& file,
                              const std::vector<std::pair<std::string, std::string>>& flags);

/// Typed views of a resolved config; errors name the offending key.
ScenarioSpec scenario_from(const nlohmann::json& cfg);
ForestConfig forest_from(const nlohmann::json& cfg);
BenchConfig bench_from(const nlohmann::json& cfg);

/// Input CSV with columns x, y, resp, x1, ..., xp.
SpatialData read_data_csv(const std::string& path);

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shaplm::cli
