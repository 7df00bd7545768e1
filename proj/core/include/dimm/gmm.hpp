#pragma once

#include "dimm/model.hpp"
#include "dimm/pairwise_cl.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace dimm {

/// Per-subject block scores side by side: row i = (psi_1', ..., psi_J').
/// Block j occupies columns [j p, (j + 1) p).
struct StackedScores {
  MatrixXd psi;
  std::size_t n_blocks = 0;
  std::size_t n_params = 0;
  std::vector<std::string> block_names;

  [[nodiscard]] std::size_t n_subjects() const { return static_cast<std::size_t>(psi.rows()); }
  [[nodiscard]] auto block_columns(std::size_t j) const {
    return psi.middleCols(static_cast<Eigen::Index>(j * n_params), static_cast<Eigen::Index>(n_params));
  }
};

StackedScores stack_scores(const std::vector<BlockFit>& fits);

struct WeightMatrix {
  MatrixXd v_hat;
  MatrixXd v_hat_inv;
  double ridge_used = 0.0;
  std::optional<std::string> warning;
};

/// Uncentered sample second moment of the stacked scores and its inverse.
/// When Cholesky fails, lambda I is added with lambda starting at
/// 1e-8 trace / (Jp) and growing tenfold up to 1e-2 trace / (Jp).
WeightMatrix weight_matrix(const StackedScores& scores);

/// Bread matrix sum_{i,j} S_i [V^-1]_{ij} S_j.
MatrixXd dimm_bread(const std::vector<BlockFit>& fits, const WeightMatrix& weights);

/// One-step combination of the block estimates.
VectorXd one_step_estimator(const std::vector<BlockFit>& fits, const WeightMatrix& weights);

/// (N sum_{i,j} S_i [V^-1]_{ij} S_j)^-1, assembled slice by slice.
MatrixXd dimm_covariance(const std::vector<BlockFit>& fits, const WeightMatrix& weights);

/// Stacked mean scores Psi_N(beta), one data pass per block with gamma fixed at
/// each block's fitted value.
VectorXd stacked_mean_scores(const VectorXd& beta, const std::vector<BlockData>& blocks,
                             const std::vector<BlockFit>& fits, std::size_t workers = 1);

/// GMM objective N Psi_N(beta)' V^-1 Psi_N(beta).
double q_statistic(const VectorXd& beta, const std::vector<BlockData>& blocks, const std::vector<BlockFit>& fits,
                   const WeightMatrix& weights, std::size_t workers = 1);

/// Log density of the confidence estimating function, dropping the constant:
/// -Q_N(beta) / 2.
double cef_log_density(const VectorXd& beta, const std::vector<BlockData>& blocks, const std::vector<BlockFit>& fits,
                       const WeightMatrix& weights, std::size_t workers = 1);

struct GofResult {
  std::size_t df = 0;
  double p_value = 1.0;
};

/// Over-identification test, df = (J - 1) p. Refuses J = 1.
GofResult gof_test(double q_stat, std::size_t n_blocks, std::size_t n_params);

struct WaldResult {
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

struct IntegratedFit {
  VectorXd beta_dimm;
  MatrixXd covariance;  // already divided by N
  double q_stat = 0.0;
  std::optional<GofResult> gof;  // empty when a single block is integrated
  std::vector<WaldResult> wald;
  std::vector<std::string> blocks_used;
  double ridge_used = 0.0;
  std::optional<std::string> warning;
};

/// z = beta_q / se_q, two-sided normal p-values and 95% intervals.
std::vector<WaldResult> wald_tests(const VectorXd& estimate, const MatrixXd& covariance);
std::vector<WaldResult> wald_tests(const IntegratedFit& fit);

/// Integration step over the named subset of blocks (all blocks when `subset`
/// is empty): stack, weight, one-step estimate, covariance, Q_N at the
/// estimate, over-identification test and Wald tests.
IntegratedFit integrate(const std::vector<BlockData>& blocks, const std::vector<BlockFit>& fits,
                        const std::vector<std::string>& subset = {}, std::size_t workers = 1);

}  // namespace dimm
