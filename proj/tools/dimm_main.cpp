#include "dimm/commands.hpp"
#include "dimm/config.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Block-wise pairwise composite likelihood with GMM integration"};
  app.require_subcommand(1);

  std::string fit_config;
  auto* fit = app.add_subcommand("fit", "Fit every block and integrate; prints or writes a JSON report");
  fit->add_option("--config", fit_config, "Fit config (JSON)")->required()->check(CLI::ExistingFile);

  std::string sim_config;
  std::string out_dir = ".";
  std::optional<std::size_t> sim_workers;
  auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo scenario");
  sim->add_option("--config", sim_config, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out-dir", out_dir, "Directory for <name>.json and <name>.replicates.csv");
  sim->add_option("--workers", sim_workers, "Override the scenario worker count")->check(CLI::PositiveNumber);

  std::string gof_config;
  std::string beta;
  auto* gof = app.add_subcommand("gof", "Evaluate Q_N and its chi-squared p-value at a given beta");
  gof->add_option("--config", gof_config, "Fit config (JSON)")->required()->check(CLI::ExistingFile);
  gof->add_option("--beta", beta, "Comma-separated coefficients, intercept first when enabled")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dimm::exit_code::config;
  }

  if (*fit) return dimm::cmd_fit(fit_config, std::cout, std::cerr);
  if (*sim) return dimm::cmd_simulate(sim_config, out_dir, sim_workers, std::cout, std::cerr);
  return dimm::cmd_gof(gof_config, beta, std::cout, std::cerr);
}
