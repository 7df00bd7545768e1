#pragma once

#include "dimm/gmm.hpp"
#include "dimm/model.hpp"
#include "dimm/pairwise_cl.hpp"
#include "dimm/simulation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dimm {

struct BlockResult {
  std::string name;
  Structure structure = Structure::AR1;
  std::size_t size = 0;
  VectorXd beta_hat;
  double sigma = 0.0;
  double rho = 0.0;
  double logcl = 0.0;
  bool converged = false;
  int simplex_iterations = 0;
  int quasi_newton_iterations = 0;
  double gradient_norm = 0.0;
};

struct CoefficientResult {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double z = 0.0;
  double p_value = 1.0;

  bool operator==(const CoefficientResult&) const = default;
};

struct FitTiming {
  std::vector<double> block_seconds;  // same order as FitReport::blocks
  double integration_seconds = 0.0;

  bool operator==(const FitTiming&) const = default;
};

struct FitReport {
  int schema_version = 1;
  std::size_t n_subjects = 0;
  std::vector<std::string> coefficient_names;
  std::vector<BlockResult> blocks;
  std::vector<std::string> blocks_used;
  std::vector<CoefficientResult> coefficients;
  MatrixXd covariance;
  double q_stat = 0.0;
  std::optional<std::size_t> gof_df;
  std::optional<double> gof_p_value;
  double ridge_used = 0.0;
  std::vector<std::string> warnings;
  FitTiming timing;

  /// Equality on everything except timing.
  [[nodiscard]] bool same_numbers(const FitReport& other) const;
};

FitReport make_fit_report(const std::vector<std::string>& coefficient_names, const std::vector<BlockData>& blocks,
                          const std::vector<BlockFit>& fits, const IntegratedFit& integrated);

/// JSON text. Timing lives under a separate "timing" key and is omitted when
/// `include_timing` is false. Doubles round-trip exactly.
std::string fit_report_to_json(const FitReport& report, bool include_timing = true);
FitReport fit_report_from_json(const std::string& text);

std::string sim_report_to_json(const SimReport& report, bool include_timing = true);

/// One row per (replicate, method, coefficient) for external plotting.
std::string sim_replicates_csv(const SimReport& report);

}  // namespace dimm
