#pragma once

#include "dimm/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dimm {

/// 2x2 covariance of a coordinate pair: sigma^2 * [[1, c], [c, 1]].
class PairCovariance {
 public:
  PairCovariance(double sigma, double correlation);

  [[nodiscard]] double sigma() const { return sigma_; }
  [[nodiscard]] double correlation() const { return c_; }
  [[nodiscard]] Eigen::Matrix2d matrix() const;
  [[nodiscard]] Eigen::Matrix2d inverse() const;
  [[nodiscard]] double log_determinant() const;

 private:
  double sigma_;
  double c_;
};

/// Within-block AR(1) generator: entry (r, t) = sigma^2 rho^|r-t|.
struct Ar1Spec {
  double sigma = 1.0;
  double rho = 0.0;
};

MatrixXd ar1_matrix(const Ar1Spec& spec, std::size_t rows, std::size_t cols);

/// Nested covariance Sigma = S (x) A with block-specific sizes. Block (j, k)
/// is S(j,k) times the m_j x m_k AR(1) cross matrix; when every block shares
/// one spec and one size this is exactly the Kronecker product.
struct KroneckerCovariance {
  MatrixXd between_block;
  std::vector<Ar1Spec> within_block;
  std::vector<std::size_t> sizes;
};

/// Assembles the M x M covariance and confirms it is positive definite.
/// Cross blocks between specs (s_j, r_j) and (s_k, r_k) use
/// s_j s_k ((r_j + r_k)/2)^lag.
MatrixXd assemble_kronecker(const KroneckerCovariance& cov);

MatrixXd assemble_kronecker(const MatrixXd& between_block, const std::vector<Ar1Spec>& within_block,
                            const std::vector<std::size_t>& sizes);

/// Random J x J correlation-like matrix: symmetric uniform(-scale, scale)
/// off-diagonals, eigenvalues floored at `eigen_floor`, rescaled to a unit
/// diagonal. Deterministic in `seed`.
MatrixXd random_correlation_matrix(std::size_t dim, std::uint64_t seed, double scale, double eigen_floor);

/// True when `m` is symmetric (to `tol`) and its LLT factorisation succeeds.
bool is_symmetric_positive_definite(const MatrixXd& m, double tol = 1e-12);

}  // namespace dimm
