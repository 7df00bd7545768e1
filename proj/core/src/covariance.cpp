#include "dimm/covariance.hpp"

#include "dimm/error.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace dimm {

PairCovariance::PairCovariance(double sigma, double correlation) : sigma_(sigma), c_(correlation) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    std::ostringstream os;
    os << "pair covariance needs sigma > 0, got " << sigma;
    throw DomainError(os.str());
  }
  if (!(std::abs(correlation) < 1.0)) {
    std::ostringstream os;
    os << "pair covariance needs |c| < 1, got " << correlation;
    throw DomainError(os.str());
  }
}

Eigen::Matrix2d PairCovariance::matrix() const {
  const double s2 = sigma_ * sigma_;
  Eigen::Matrix2d m;
  m << s2, s2 * c_, s2 * c_, s2;
  return m;
}

Eigen::Matrix2d PairCovariance::inverse() const {
  const double k = 1.0 / (sigma_ * sigma_ * (1.0 - c_ * c_));
  Eigen::Matrix2d m;
  m << k, -c_ * k, -c_ * k, k;
  return m;
}

double PairCovariance::log_determinant() const {
  return 4.0 * std::log(sigma_) + std::log1p(-c_ * c_);
}

MatrixXd ar1_matrix(const Ar1Spec& spec, std::size_t rows, std::size_t cols) {
  MatrixXd a(rows, cols);
  const double s2 = spec.sigma * spec.sigma;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < cols; ++t) {
      const auto lag = r > t ? r - t : t - r;
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) =
          s2 * std::pow(spec.rho, static_cast<double>(lag));
    }
  }
  return a;
}

bool is_symmetric_positive_definite(const MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

MatrixXd assemble_kronecker(const MatrixXd& between_block, const std::vector<Ar1Spec>& within_block,
                            const std::vector<std::size_t>& sizes) {
  const auto j_blocks = sizes.size();
  if (between_block.rows() != static_cast<Eigen::Index>(j_blocks) ||
      between_block.cols() != static_cast<Eigen::Index>(j_blocks)) {
    throw CovarianceError("between-block matrix must be J x J with J = number of block sizes");
  }
  if (within_block.size() != 1 && within_block.size() != j_blocks) {
    throw CovarianceError("within-block specs must be one shared spec or one per block");
  }
  if (!is_symmetric_positive_definite(between_block)) {
    throw CovarianceError("between-block matrix S is not symmetric positive definite");
  }
  auto spec_of = [&](std::size_t j) -> const Ar1Spec& {
    return within_block.size() == 1 ? within_block.front() : within_block[j];
  };
  std::size_t m_total = 0;
  std::vector<std::size_t> offsets;
  for (auto s : sizes) {
    offsets.push_back(m_total);
    m_total += s;
  }

  MatrixXd sigma(m_total, m_total);
  for (std::size_t j = 0; j < j_blocks; ++j) {
    for (std::size_t k = 0; k < j_blocks; ++k) {
      const auto& sj = spec_of(j);
      const auto& sk = spec_of(k);
      const Ar1Spec cross{std::sqrt(sj.sigma * sk.sigma), 0.5 * (sj.rho + sk.rho)};
      sigma.block(static_cast<Eigen::Index>(offsets[j]), static_cast<Eigen::Index>(offsets[k]),
                  static_cast<Eigen::Index>(sizes[j]), static_cast<Eigen::Index>(sizes[k])) =
          between_block(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) *
          ar1_matrix(cross, sizes[j], sizes[k]);
    }
  }
  if (Eigen::LLT<MatrixXd>(sigma).info() != Eigen::Success) {
    throw CovarianceError("assembled nested covariance is not positive definite");
  }
  return sigma;
}

MatrixXd assemble_kronecker(const KroneckerCovariance& cov) {
  return assemble_kronecker(cov.between_block, cov.within_block, cov.sizes);
}

MatrixXd random_correlation_matrix(std::size_t dim, std::uint64_t seed, double scale, double eigen_floor) {
  if (dim == 0) throw CovarianceError("random_correlation_matrix: dimension must be positive");
  if (!(eigen_floor > 0.0)) throw CovarianceError("random_correlation_matrix: eigen_floor must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-scale, scale);
  const auto n = static_cast<Eigen::Index>(dim);
  MatrixXd s = MatrixXd::Identity(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index t = r + 1; t < n; ++t) {
      s(r, t) = s(t, r) = unif(rng);
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
  VectorXd vals = eig.eigenvalues().cwiseMax(eigen_floor);
  MatrixXd floored = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  const VectorXd inv_sd = floored.diagonal().cwiseSqrt().cwiseInverse();
  MatrixXd out = inv_sd.asDiagonal() * floored * inv_sd.asDiagonal();
  out = 0.5 * (out + out.transpose());
  out.diagonal().setOnes();
  return out;
}

}  // namespace dimm
