#pragma once

#include "dimm/config.hpp"
#include "dimm/report.hpp"

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace dimm {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int other = 1;
inline constexpr int config = 2;
inline constexpr int ingestion = 3;
inline constexpr int fit = 4;
inline constexpr int integration = 5;
}  // namespace exit_code

/// Exit status for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Load, partition, fit every block on `config.workers` threads, integrate.
FitReport run_fit(const FitConfig& config);

struct GofEvaluation {
  std::vector<std::string> blocks_used;
  VectorXd beta;
  double q_stat = 0.0;
  std::optional<std::size_t> df;
  std::optional<double> p_value;
};

/// Q_N at a user-supplied beta, with gamma fixed at each block's fit.
GofEvaluation run_gof(const FitConfig& config, const VectorXd& beta);
std::string gof_evaluation_to_json(const GofEvaluation& g);

/// The command entry points print results or a one-line error to `err` and
/// return the process exit status.
int cmd_fit(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int cmd_gof(const std::filesystem::path& config_path, const std::string& beta_csv, std::ostream& out,
            std::ostream& err);

/// Writes <out_dir>/<name>.json and <out_dir>/<name>.replicates.csv.
/// `workers`, when set, overrides the scenario's worker count.
int cmd_simulate(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
                 std::optional<std::size_t> workers, std::ostream& out, std::ostream& err);

}  // namespace dimm
