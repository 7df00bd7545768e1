#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace dimm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Structure { AR1, CS };

std::string to_string(Structure s);
Structure structure_from_string(const std::string& name);

/// Within-block dependence: one standard deviation and one correlation shared
/// by every coordinate pair of the block.
struct DependenceKind {
  Structure structure = Structure::AR1;
  double sigma = 1.0;
  double rho = 0.0;

  /// Open interval of admissible correlations for a block of `block_size`
  /// coordinates. CS needs rho > -1/(m-1) for positive definiteness.
  static std::pair<double, double> rho_bounds(Structure s, std::size_t block_size);

  /// Throws DomainError unless sigma > 0 and rho lies inside rho_bounds.
  void validate(std::size_t block_size) const;
};

/// Correlation of a coordinate pair `lag` positions apart.
double pair_correlation(const DependenceKind& kind, std::size_t lag);

/// N subjects, each with an M-vector response and an M x p covariate matrix.
/// Covariates are stored stacked: rows [i*M, (i+1)*M) belong to subject i.
class PanelDataset {
 public:
  PanelDataset(MatrixXd responses, MatrixXd covariates);

  [[nodiscard]] std::size_t n_subjects() const { return static_cast<std::size_t>(responses_.rows()); }
  [[nodiscard]] std::size_t response_dim() const { return static_cast<std::size_t>(responses_.cols()); }
  [[nodiscard]] std::size_t n_covariates() const { return static_cast<std::size_t>(covariates_.cols()); }

  [[nodiscard]] const MatrixXd& responses() const { return responses_; }
  [[nodiscard]] const MatrixXd& covariates() const { return covariates_; }

  [[nodiscard]] auto subject_covariates(std::size_t i) const {
    const auto m = static_cast<Eigen::Index>(response_dim());
    return covariates_.middleRows(static_cast<Eigen::Index>(i) * m, m);
  }

  friend bool operator==(const PanelDataset& a, const PanelDataset& b);

 private:
  MatrixXd responses_;
  MatrixXd covariates_;
};

struct BlockSpec {
  std::string name;
  std::size_t size = 0;
  Structure structure = Structure::AR1;
};

/// Contiguous split of the M response coordinates into J named blocks.
class BlockPartition {
 public:
  explicit BlockPartition(std::vector<BlockSpec> blocks);

  [[nodiscard]] std::size_t n_blocks() const { return blocks_.size(); }
  [[nodiscard]] std::size_t total_size() const { return total_; }
  [[nodiscard]] const std::vector<BlockSpec>& blocks() const { return blocks_; }
  [[nodiscard]] const BlockSpec& block(std::size_t j) const { return blocks_.at(j); }
  [[nodiscard]] std::size_t offset(std::size_t j) const { return offsets_.at(j); }

  /// Index of the block called `name`; throws PartitionError when absent.
  [[nodiscard]] std::size_t index_of(const std::string& name) const;

  /// Same block sizes and names, every block switched to structure `s`.
  [[nodiscard]] BlockPartition with_structure(Structure s) const;

 private:
  std::vector<BlockSpec> blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

/// Responses and covariates for one block: N x m responses, (N*m) x p
/// covariates stacked by subject.
struct BlockData {
  std::string name;
  MatrixXd responses;
  MatrixXd covariates;

  [[nodiscard]] std::size_t n_subjects() const { return static_cast<std::size_t>(responses.rows()); }
  [[nodiscard]] std::size_t block_size() const { return static_cast<std::size_t>(responses.cols()); }
  [[nodiscard]] std::size_t n_covariates() const { return static_cast<std::size_t>(covariates.cols()); }

  [[nodiscard]] auto subject_covariates(std::size_t i) const {
    const auto m = static_cast<Eigen::Index>(block_size());
    return covariates.middleRows(static_cast<Eigen::Index>(i) * m, m);
  }
};

std::vector<BlockData> partition_dataset(const PanelDataset& data, const BlockPartition& part);

/// Inverse of partition_dataset: concatenates blocks back into one panel.
PanelDataset departition(const std::vector<BlockData>& blocks);

}  // namespace dimm
