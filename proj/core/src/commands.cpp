#include "dimm/commands.hpp"

#include "dimm/cpu_time.hpp"
#include "dimm/error.hpp"
#include "dimm/gmm.hpp"
#include "dimm/panel_io.hpp"
#include "dimm/parallel.hpp"

#include <json.hpp>

#include <fstream>
#include <ostream>

namespace dimm {

namespace {

struct Prepared {
  std::vector<std::string> coefficient_names;
  std::vector<BlockData> blocks;
  std::vector<BlockFit> fits;
  std::vector<double> block_seconds;
};

Prepared prepare(const FitConfig& cfg) {
  auto loaded = load_panel(cfg.response_path, cfg.covariate_path);
  Prepared p;
  if (cfg.intercept) p.coefficient_names.emplace_back("intercept");
  for (const auto& n : loaded.covariate_names) p.coefficient_names.push_back(n);
  const PanelDataset data = cfg.intercept ? with_intercept(loaded.data) : std::move(loaded.data);

  const BlockPartition part(cfg.blocks);
  p.blocks = partition_dataset(data, part);

  // Block fits run on the worker pool; each slot records its own CPU time.
  std::vector<std::optional<BlockFit>> slots(p.blocks.size());
  p.block_seconds.assign(p.blocks.size(), 0.0);
  parallel_for(p.blocks.size(), cfg.workers, [&](std::size_t j) {
    const double t0 = thread_cpu_seconds();
    slots[j] = fit_block(p.blocks[j], cfg.blocks[j].structure, cfg.optimizer);
    p.block_seconds[j] = thread_cpu_seconds() - t0;
  });
  for (auto& s : slots) p.fits.push_back(std::move(*s));
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const PartitionError*>(&e) ||
      dynamic_cast<const ScenarioError*>(&e)) {
    return exit_code::config;
  }
  if (dynamic_cast<const IngestionError*>(&e)) return exit_code::ingestion;
  if (dynamic_cast<const FitError*>(&e) || dynamic_cast<const SingularityError*>(&e) ||
      dynamic_cast<const DomainError*>(&e)) {
    return exit_code::fit;
  }
  if (dynamic_cast<const StackingError*>(&e) || dynamic_cast<const SingularWeightError*>(&e) ||
      dynamic_cast<const IntegrationError*>(&e) || dynamic_cast<const TestUndefinedError*>(&e)) {
    return exit_code::integration;
  }
  return exit_code::other;
}

FitReport run_fit(const FitConfig& cfg) {
  auto p = prepare(cfg);
  const double t0 = thread_cpu_seconds();
  const auto integ = integrate(p.blocks, p.fits, cfg.blocks_to_integrate, cfg.workers);
  const double t1 = thread_cpu_seconds();
  auto report = make_fit_report(p.coefficient_names, p.blocks, p.fits, integ);
  report.timing.block_seconds = p.block_seconds;
  report.timing.integration_seconds = t1 - t0;
  return report;
}

GofEvaluation run_gof(const FitConfig& cfg, const VectorXd& beta) {
  auto p = prepare(cfg);
  std::vector<BlockData> blocks;
  std::vector<BlockFit> fits;
  if (cfg.blocks_to_integrate.empty()) {
    blocks = p.blocks;
    fits = p.fits;
  } else {
    for (std::size_t j = 0; j < p.fits.size(); ++j) {
      for (const auto& name : cfg.blocks_to_integrate) {
        if (p.fits[j].name == name) {
          blocks.push_back(p.blocks[j]);
          fits.push_back(p.fits[j]);
        }
      }
    }
  }
  const auto n_params = fits.front().n_params();
  if (static_cast<std::size_t>(beta.size()) != n_params) {
    throw ConfigError("--beta has " + std::to_string(beta.size()) + " values; the model has " +
                      std::to_string(n_params) + " coefficients");
  }
  const auto weights = weight_matrix(stack_scores(fits));
  GofEvaluation g;
  for (const auto& f : fits) g.blocks_used.push_back(f.name);
  g.beta = beta;
  g.q_stat = q_statistic(beta, blocks, fits, weights, cfg.workers);
  if (fits.size() >= 2) {
    const auto r = gof_test(g.q_stat, fits.size(), n_params);
    g.df = r.df;
    g.p_value = r.p_value;
  }
  return g;
}

std::string gof_evaluation_to_json(const GofEvaluation& g) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["blocks_used"] = g.blocks_used;
  j["beta"] = std::vector<double>(g.beta.data(), g.beta.data() + g.beta.size());
  j["q_stat"] = g.q_stat;
  j["df"] = g.df ? nlohmann::ordered_json(*g.df) : nlohmann::ordered_json(nullptr);
  j["p_value"] = g.p_value ? nlohmann::ordered_json(*g.p_value) : nlohmann::ordered_json(nullptr);
  return j.dump(2) + "\n";
}

int cmd_fit(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  try {
    const auto cfg = load_fit_config(config_path);
    const auto report = run_fit(cfg);
    const auto text = fit_report_to_json(report);
    if (cfg.output_path) {
      write_text(*cfg.output_path, text);
      out << "wrote " << cfg.output_path->string() << '\n';
    } else {
      out << text;
    }
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    return exit_code::ok;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_gof(const std::filesystem::path& config_path, const std::string& beta_csv, std::ostream& out,
            std::ostream& err) {
  try {
    const auto cfg = load_fit_config(config_path);
    const auto beta = parse_number_list(beta_csv);
    out << gof_evaluation_to_json(run_gof(cfg, beta));
    return exit_code::ok;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_simulate(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
                 std::optional<std::size_t> workers, std::ostream& out, std::ostream& err) {
  try {
    auto scn = load_scenario(scenario_path);
    if (workers) scn.workers = *workers;
    const auto report = run_scenario(scn);
    std::filesystem::create_directories(out_dir);
    const auto json_path = out_dir / (scn.name + ".json");
    const auto csv_path = out_dir / (scn.name + ".replicates.csv");
    write_text(json_path, sim_report_to_json(report));
    write_text(csv_path, sim_replicates_csv(report));
    out << "wrote " << json_path.string() << " and " << csv_path.string() << '\n';
    if (report.had_failures) err << "warning: some replicates failed; see \"failures\" in the report\n";
    return exit_code::ok;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace dimm
