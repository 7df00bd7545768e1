#pragma once

#include "dimm/covariance.hpp"
#include "dimm/model.hpp"
#include "dimm/pairwise_cl.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dimm {

struct CovariateRecipe {
  enum class Kind { StandardNormal, Bernoulli, Categorical, Uniform01, Interaction, MvNormalRows, Alternating01 };

  Kind kind = Kind::StandardNormal;
  double q = 0.5;              // Bernoulli success probability
  std::vector<double> probs;   // Categorical level probabilities; levels are 1..K
  std::size_t a = 0, b = 0;    // Interaction operands, indices into the recipe list
  double rho = 0.0;            // MvNormalRows: AR(1) correlation of S_x across the M rows

  /// True when the covariate varies across the M rows of one subject.
  [[nodiscard]] bool row_varying() const;
};

std::string to_string(CovariateRecipe::Kind k);
CovariateRecipe::Kind covariate_kind_from_string(const std::string& name);

enum class SimMethod { Dimm, DimmAR1, DimmCS, GeeInd, GeeCS, GlsOracle };

std::string to_string(SimMethod m);
SimMethod sim_method_from_string(const std::string& name);

/// How the between-block factor S was obtained, echoed in reports.
struct BetweenBlockRecipe {
  std::optional<MatrixXd> explicit_matrix;
  std::uint64_t seed = 0;
  double scale = 0.5;
  double eigen_floor = 0.1;
};

struct SimScenario {
  std::string name;
  std::size_t n_subjects = 0;
  bool intercept = true;
  VectorXd beta0;
  BlockPartition partition{{{"block1", 2, Structure::AR1}}};
  Ar1Spec within_block;
  BetweenBlockRecipe between_recipe;
  std::vector<CovariateRecipe> covariates;
  std::size_t n_replicates = 1;
  std::uint64_t seed = 1;
  std::vector<SimMethod> methods;
  std::size_t workers = 1;
  std::vector<std::string> subgroup;  // DIMM integrates only these blocks when non-empty
  FitOptions fit_options;

  [[nodiscard]] std::size_t n_params() const { return covariates.size() + (intercept ? 1 : 0); }
  [[nodiscard]] MatrixXd between_block() const;
  [[nodiscard]] MatrixXd covariance() const;
  [[nodiscard]] std::vector<std::string> coefficient_names() const;

  /// Throws ScenarioError naming the first inconsistent field.
  void validate() const;
};

/// Draws replicate `rep` of the scenario. Covariates follow the recipe list,
/// responses are X beta0 + L z with L the Cholesky factor of S (x) A.
/// Deterministic in (seed, rep).
class ReplicateGenerator {
 public:
  explicit ReplicateGenerator(const SimScenario& scenario);

  [[nodiscard]] PanelDataset generate(std::size_t rep) const;
  [[nodiscard]] const MatrixXd& covariance() const { return sigma_; }

 private:
  SimScenario scn_;
  MatrixXd sigma_;
  MatrixXd sigma_chol_;
  std::vector<MatrixXd> row_chol_;  // per MvNormalRows recipe
};

PanelDataset generate_replicate(const SimScenario& scenario, std::size_t rep);

struct CoefficientMetrics {
  double rmse = 0.0;
  double bias = 0.0;
  double ese = 0.0;
  double ase = 0.0;
  double coverage = 0.0;        // 95% CI covers beta0
  double rejection_rate = 0.0;  // level-0.05 Wald rejection of beta_q = 0
};

struct GofSummary {
  std::size_t df = 0;
  double mean_q = 0.0;
  double variance_q = 0.0;
  double rejection_rate = 0.0;  // Q above the chi-squared 0.95 quantile
  std::vector<double> probs;
  std::vector<double> empirical_quantiles;
  std::vector<double> theoretical_quantiles;
};

struct MethodReport {
  SimMethod method = SimMethod::Dimm;
  std::size_t n_success = 0;
  std::size_t n_failed = 0;
  std::vector<CoefficientMetrics> coefficients;
  std::optional<GofSummary> gof;
  double cpu_seconds = 0.0;  // timing; excluded from determinism comparisons
};

struct ReplicateRecord {
  std::size_t rep = 0;
  SimMethod method = SimMethod::Dimm;
  bool ok = false;
  VectorXd estimate;
  VectorXd std_error;
  std::optional<double> q_stat;
  std::string failure;
};

struct SimReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t n_replicates = 0;
  std::vector<std::string> coefficient_names;
  VectorXd beta0;
  MatrixXd between_block;
  std::vector<MethodReport> methods;
  std::vector<ReplicateRecord> replicates;
  bool had_failures = false;
};

/// Metrics for one method from per-replicate estimates and standard errors.
CoefficientMetrics coefficient_metrics(const std::vector<double>& estimates, const std::vector<double>& std_errors,
                                       double truth);

/// Fits every requested method on every replicate, replicates in parallel on
/// `scenario.workers` threads, and aggregates metrics in replicate order.
/// Throws ScenarioError when more than 5% of a method's replicates fail.
SimReport run_scenario(const SimScenario& scenario);

/// Synthetic scenario shaped like the infant EEG study: 157 subjects,
/// 6 regions x 3 ERP components = 18 compound-symmetry blocks of 7-9
/// channels. All numeric settings are synthetic defaults.
SimScenario eeg_mimic_scenario();

}  // namespace dimm
