#pragma once

#include "dimm/error.hpp"
#include "dimm/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace dimm {

/// Pair-weight matrix W of a block under gamma. Each pair (r, t) contributes
/// k = 1 / (sigma^2 (1 - c^2)) to W(r,r) and W(t,t) and -c k to W(r,t), so the
/// residual part of one subject's pairwise log-CL is -e' W e / 2.
MatrixXd pair_weight_matrix(const DependenceKind& gamma, std::size_t block_size);

/// Pairwise log composite likelihood summed over subjects and all
/// m(m-1)/2 coordinate pairs, evaluated pair by pair.
double block_logcl(const VectorXd& beta, const DependenceKind& gamma, const BlockData& block);

/// Per-subject beta-scores, row i = psi(beta; y_i, gamma)'. N x p.
MatrixXd block_score_beta(const VectorXd& beta, const DependenceKind& gamma, const BlockData& block);

/// (d/dsigma, d/drho) of the mean log-CL, by central differences in the
/// unconstrained (log sigma, scaled atanh rho) coordinates.
Eigen::Vector2d block_score_gamma(const VectorXd& beta, const DependenceKind& gamma, const BlockData& block);

/// Mean negative beta-Jacobian of the scores. Exact and beta-free for the
/// identity-link Gaussian model.
MatrixXd block_sensitivity(const DependenceKind& gamma, const BlockData& block);

/// Unconstrained coordinates for gamma: sigma = exp(t1),
/// rho = lo + (hi - lo) (tanh(t2) + 1) / 2 with (lo, hi) the admissible range.
struct GammaTransform {
  Structure structure;
  double rho_lo;
  double rho_hi;

  GammaTransform(Structure s, std::size_t block_size);

  [[nodiscard]] DependenceKind to_gamma(double t1, double t2) const;
  [[nodiscard]] Eigen::Vector2d to_theta(const DependenceKind& gamma) const;
  [[nodiscard]] double drho_dt2(double t2) const;
};

/// Lag-grouped quadratic moments of a block. Because sigma is shared and the
/// pair correlation depends only on the lag, the log-CL at any (beta, gamma)
/// is a function of these O(m p^2) numbers, independent of N. Moments are
/// taken around a reference beta to limit cancellation.
class PairwiseMoments {
 public:
  explicit PairwiseMoments(const BlockData& block, const VectorXd& reference_beta);

  [[nodiscard]] std::size_t n_subjects() const { return n_; }
  [[nodiscard]] std::size_t block_size() const { return m_; }

  [[nodiscard]] double logcl(const VectorXd& beta, const DependenceKind& gamma) const;
  [[nodiscard]] VectorXd gradient_beta(const VectorXd& beta, const DependenceKind& gamma) const;
  /// Analytic (d/dsigma, d/drho) of the summed log-CL.
  [[nodiscard]] Eigen::Vector2d gradient_gamma(const VectorXd& beta, const DependenceKind& gamma) const;

 private:
  struct QuadForm {
    double yy = 0.0;
    VectorXd xy;
    MatrixXd xx;
    [[nodiscard]] double value(const VectorXd& delta) const { return yy - 2.0 * delta.dot(xy) + delta.dot(xx * delta); }
    [[nodiscard]] VectorXd grad(const VectorXd& delta) const { return 2.0 * (xx * delta - xy); }
  };
  struct Lag {
    double n_pairs = 0.0;
    QuadForm squares;  // sum of e_r^2 + e_t^2 over pairs at this lag
    QuadForm cross;    // sum of e_r e_t over pairs at this lag
  };

  std::size_t n_ = 0;
  std::size_t m_ = 0;
  VectorXd reference_;
  std::vector<Lag> lags_;  // lags_[L-1] for L = 1..m-1
};

struct FitOptions {
  int simplex_max_iterations = 500;
  double simplex_relative_tolerance = 1e-10;
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;
  std::optional<VectorXd> start_beta;  // default (1, ..., 1)
  double start_sigma = 1.0;
  double start_rho = 0.0;
};

struct OptimizerTrace {
  int simplex_iterations = 0;
  int simplex_evaluations = 0;
  bool simplex_stalled = false;
  int quasi_newton_iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
};

struct BlockFit {
  std::string name;
  VectorXd beta_hat;
  DependenceKind gamma_hat;
  MatrixXd subject_scores;  // N x p, evaluated at (beta_hat, gamma_hat)
  MatrixXd sensitivity;     // p x p
  double logcl_at_optimum = 0.0;
  OptimizerTrace trace;

  [[nodiscard]] std::size_t n_subjects() const { return static_cast<std::size_t>(subject_scores.rows()); }
  [[nodiscard]] std::size_t n_params() const { return static_cast<std::size_t>(beta_hat.size()); }
};

class BlockFitError : public FitError {
 public:
  BlockFitError(const std::string& what, OptimizerTrace trace) : FitError(what), trace_(trace) {}
  [[nodiscard]] const OptimizerTrace& trace() const { return trace_; }

 private:
  OptimizerTrace trace_;
};

/// Joint maximum pairwise-CL fit of (beta, gamma) for one block: a simplex
/// phase from the start values, then BFGS on the mean log-CL. Converged means
/// gradient sup-norm <= gradient_tolerance; when sigma is so small that this
/// is below the rounding floor of beta, that floor is used for the beta part.
BlockFit fit_block(const BlockData& block, Structure structure, const FitOptions& options = {});

/// Fits every block, running up to `workers` fits at a time. Output is in
/// block order regardless of scheduling.
std::vector<BlockFit> fit_blocks(const std::vector<BlockData>& blocks, const std::vector<Structure>& structures,
                                 const FitOptions& options = {}, std::size_t workers = 1);

}  // namespace dimm
