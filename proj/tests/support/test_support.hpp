#pragma once

#include "dimm/covariance.hpp"
#include "dimm/model.hpp"
#include "dimm/simulation.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>

namespace dimm::testing {

/// Block of N subjects, m coordinates, p covariates (first column ones when
/// `intercept`), responses drawn from AR(1) (sigma, rho) noise around X beta.
inline BlockData random_block(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t p, const VectorXd& beta,
                              double sigma, double rho, bool intercept = true, const std::string& name = "b") {
  std::normal_distribution<double> z;
  BlockData b;
  b.name = name;
  b.responses.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  b.covariates.resize(static_cast<Eigen::Index>(n * m), static_cast<Eigen::Index>(p));
  const MatrixXd chol = ar1_matrix({sigma, rho}, m, m).llt().matrixL();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t k = 0; k < p; ++k) {
        b.covariates(static_cast<Eigen::Index>(i * m + r), static_cast<Eigen::Index>(k)) =
            (intercept && k == 0) ? 1.0 : z(rng);
      }
    }
    VectorXd e(static_cast<Eigen::Index>(m));
    for (auto& v : e) v = z(rng);
    const VectorXd y = b.subject_covariates(i) * beta + chol * e;
    b.responses.row(static_cast<Eigen::Index>(i)) = y.transpose();
  }
  return b;
}

/// Scenario with an intercept plus `n_cov` standard-normal covariates,
/// AR(1)(2, 0.5) within blocks and a seeded random between-block factor.
inline SimScenario small_scenario(std::size_t n, const std::vector<std::size_t>& sizes, std::size_t n_cov,
                                  std::uint64_t seed, std::size_t reps = 1) {
  SimScenario scn;
  scn.name = "small";
  scn.n_subjects = n;
  std::vector<BlockSpec> specs;
  for (std::size_t j = 0; j < sizes.size(); ++j) specs.push_back({"b" + std::to_string(j + 1), sizes[j], Structure::AR1});
  scn.partition = BlockPartition(specs);
  scn.within_block = {2.0, 0.5};
  scn.between_recipe.seed = seed;
  scn.covariates.assign(n_cov, CovariateRecipe{});
  scn.beta0 = VectorXd::LinSpaced(static_cast<Eigen::Index>(n_cov + 1), 0.3, 0.9);
  scn.n_replicates = reps;
  scn.seed = seed;
  scn.methods = {SimMethod::Dimm};
  return scn;
}

inline CovariateRecipe recipe(CovariateRecipe::Kind kind) {
  CovariateRecipe r;
  r.kind = kind;
  return r;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace dimm::testing
