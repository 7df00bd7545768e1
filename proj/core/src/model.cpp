#include "dimm/model.hpp"

#include "dimm/error.hpp"

#include <cmath>
#include <sstream>

namespace dimm {

std::string to_string(Structure s) {
  switch (s) {
    case Structure::AR1:
      return "AR1";
    case Structure::CS:
      return "CS";
  }
  return "?";
}

Structure structure_from_string(const std::string& name) {
  if (name == "AR1" || name == "ar1") return Structure::AR1;
  if (name == "CS" || name == "cs") return Structure::CS;
  throw ConfigError("unknown dependence structure '" + name + "' (expected AR1 or CS)");
}

std::pair<double, double> DependenceKind::rho_bounds(Structure s, std::size_t block_size) {
  if (s == Structure::CS && block_size > 2) {
    return {-1.0 / static_cast<double>(block_size - 1), 1.0};
  }
  return {-1.0, 1.0};
}

void DependenceKind::validate(std::size_t block_size) const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    std::ostringstream os;
    os << "dependence parameter sigma must be positive, got " << sigma;
    throw DomainError(os.str());
  }
  const auto [lo, hi] = rho_bounds(structure, block_size);
  if (!(rho > lo && rho < hi)) {
    std::ostringstream os;
    os << to_string(structure) << " correlation " << rho << " outside (" << lo << ", " << hi
       << ") for block size " << block_size;
    throw DomainError(os.str());
  }
}

double pair_correlation(const DependenceKind& kind, std::size_t lag) {
  if (lag == 0) throw DomainError("pair_correlation: lag must be >= 1 (pairs are distinct coordinates)");
  if (kind.structure == Structure::CS) return kind.rho;
  return std::pow(kind.rho, static_cast<double>(lag));
}

PanelDataset::PanelDataset(MatrixXd responses, MatrixXd covariates)
    : responses_(std::move(responses)), covariates_(std::move(covariates)) {
  const auto n = responses_.rows();
  const auto m = responses_.cols();
  if (n < 2) throw IngestionError("panel needs at least 2 subjects");
  if (m < 2) throw IngestionError("panel needs response dimension M >= 2");
  if (covariates_.cols() < 1) throw IngestionError("panel needs at least one covariate");
  if (covariates_.rows() != n * m) {
    std::ostringstream os;
    os << "covariate matrix has " << covariates_.rows() << " rows, expected N*M = " << n * m;
    throw IngestionError(os.str());
  }
  if (!responses_.allFinite()) throw IngestionError("responses contain non-finite values");
  if (!covariates_.allFinite()) throw IngestionError("covariates contain non-finite values");
}

bool operator==(const PanelDataset& a, const PanelDataset& b) {
  return a.responses_.rows() == b.responses_.rows() && a.responses_.cols() == b.responses_.cols() &&
         a.covariates_.cols() == b.covariates_.cols() && a.responses_ == b.responses_ &&
         a.covariates_ == b.covariates_;
}

BlockPartition::BlockPartition(std::vector<BlockSpec> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw PartitionError("partition has no blocks");
  offsets_.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    if (b.size < 2) {
      throw PartitionError("block '" + b.name + "' has size " + std::to_string(b.size) +
                           "; pairwise likelihood needs at least 2 coordinates");
    }
    for (std::size_t k = 0; k < offsets_.size(); ++k) {
      if (blocks_[k].name == b.name) throw PartitionError("duplicate block name '" + b.name + "'");
    }
    offsets_.push_back(total_);
    total_ += b.size;
  }
}

std::size_t BlockPartition::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    if (blocks_[j].name == name) return j;
  }
  throw PartitionError("no block named '" + name + "' in partition");
}

BlockPartition BlockPartition::with_structure(Structure s) const {
  auto copy = blocks_;
  for (auto& b : copy) b.structure = s;
  return BlockPartition(std::move(copy));
}

std::vector<BlockData> partition_dataset(const PanelDataset& data, const BlockPartition& part) {
  if (part.total_size() != data.response_dim()) {
    std::ostringstream os;
    os << "partition covers " << part.total_size() << " coordinates but the data has M = "
       << data.response_dim();
    throw PartitionError(os.str());
  }
  const auto n = static_cast<Eigen::Index>(data.n_subjects());
  const auto m_total = static_cast<Eigen::Index>(data.response_dim());
  const auto p = static_cast<Eigen::Index>(data.n_covariates());

  std::vector<BlockData> out;
  out.reserve(part.n_blocks());
  for (std::size_t j = 0; j < part.n_blocks(); ++j) {
    const auto off = static_cast<Eigen::Index>(part.offset(j));
    const auto m = static_cast<Eigen::Index>(part.block(j).size);
    BlockData b;
    b.name = part.block(j).name;
    b.responses = data.responses().middleCols(off, m);
    b.covariates.resize(n * m, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      b.covariates.middleRows(i * m, m) = data.covariates().middleRows(i * m_total + off, m);
    }
    out.push_back(std::move(b));
  }
  return out;
}

PanelDataset departition(const std::vector<BlockData>& blocks) {
  if (blocks.empty()) throw PartitionError("departition: no blocks");
  const auto n = blocks.front().responses.rows();
  const auto p = blocks.front().covariates.cols();
  Eigen::Index m_total = 0;
  for (const auto& b : blocks) {
    if (b.responses.rows() != n || b.covariates.cols() != p) {
      throw PartitionError("departition: block '" + b.name + "' has mismatched N or p");
    }
    m_total += b.responses.cols();
  }
  MatrixXd y(n, m_total);
  MatrixXd x(n * m_total, p);
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    const auto m = b.responses.cols();
    y.middleCols(off, m) = b.responses;
    for (Eigen::Index i = 0; i < n; ++i) {
      x.middleRows(i * m_total + off, m) = b.covariates.middleRows(i * m, m);
    }
    off += m;
  }
  return PanelDataset(std::move(y), std::move(x));
}

}  // namespace dimm
