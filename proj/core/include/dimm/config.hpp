#pragma once

#include "dimm/model.hpp"
#include "dimm/pairwise_cl.hpp"
#include "dimm/simulation.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dimm {

inline constexpr int kSchemaVersion = 1;

/// Environment variable consulted for the default worker count.
inline constexpr const char* kWorkersEnv = "DIMM_WORKERS";

/// Inputs of the `fit` and `gof` commands. Relative paths are resolved
/// against the directory holding the config file.
struct FitConfig {
  std::filesystem::path response_path;
  std::filesystem::path covariate_path;
  std::vector<BlockSpec> blocks;
  bool intercept = true;
  std::vector<std::string> blocks_to_integrate;
  std::size_t workers = 1;
  FitOptions optimizer;
  std::optional<std::filesystem::path> output_path;
};

/// Worker count from DIMM_WORKERS, or `fallback` when unset or invalid.
std::size_t default_worker_count(std::size_t fallback = 1);

/// Parses a JSON fit config. Errors are ConfigError naming the field path.
FitConfig parse_fit_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
FitConfig load_fit_config(const std::filesystem::path& path);

/// Parses a JSON scenario. Errors are ConfigError naming the field path.
SimScenario parse_scenario(const std::string& json_text);
SimScenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const SimScenario& scenario);

/// Comma-separated numbers, e.g. "0.3,0.6".
VectorXd parse_number_list(const std::string& text);

}  // namespace dimm
