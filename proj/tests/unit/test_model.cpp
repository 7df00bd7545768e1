#include "dimm/covariance.hpp"
#include "dimm/error.hpp"
#include "dimm/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dimm;

namespace {

PanelDataset sequential_panel(std::size_t n, std::size_t m, std::size_t p) {
  MatrixXd y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  MatrixXd x(static_cast<Eigen::Index>(n * m), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = static_cast<double>(i) + 0.25;
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 1.0 / (1.0 + static_cast<double>(i));
  return {y, x};
}

}  // namespace

TEST_CASE("partition M=5 into (3,2) takes contiguous columns") {
  const auto data = sequential_panel(4, 5, 2);
  const BlockPartition part({{"a", 3, Structure::AR1}, {"b", 2, Structure::CS}});
  const auto blocks = partition_dataset(data, part);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].responses == data.responses().leftCols(3));
  CHECK(blocks[1].responses == data.responses().rightCols(2));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(blocks[0].subject_covariates(i) == data.subject_covariates(i).topRows(3));
    CHECK(blocks[1].subject_covariates(i) == data.subject_covariates(i).bottomRows(2));
  }
  CHECK(part.offset(1) == 3);
}

TEST_CASE("block sizes (45,42,50,34,29) give five blocks of those widths") {
  const std::vector<std::size_t> sizes{45, 42, 50, 34, 29};
  std::vector<BlockSpec> specs;
  for (std::size_t j = 0; j < sizes.size(); ++j) specs.push_back({"b" + std::to_string(j), sizes[j], Structure::AR1});
  const BlockPartition part(specs);
  CHECK(part.total_size() == 200);
  const auto blocks = partition_dataset(sequential_panel(3, 200, 1), part);
  REQUIRE(blocks.size() == 5);
  for (std::size_t j = 0; j < 5; ++j) CHECK(blocks[j].block_size() == sizes[j]);
}

TEST_CASE("single block partition is the identity and departition round-trips") {
  const auto data = sequential_panel(3, 6, 2);
  const auto one = partition_dataset(data, BlockPartition({{"all", 6, Structure::AR1}}));
  CHECK(one[0].responses == data.responses());
  CHECK(one[0].covariates == data.covariates());
  CHECK(departition(one) == data);

  const auto three =
      partition_dataset(data, BlockPartition({{"a", 2, Structure::AR1}, {"b", 2, Structure::AR1}, {"c", 2, Structure::CS}}));
  CHECK(departition(three) == data);
}

TEST_CASE("partition errors name the problem") {
  CHECK_THROWS_AS(BlockPartition({{"a", 1, Structure::AR1}}), PartitionError);
  CHECK_THROWS_AS(BlockPartition({{"a", 2, Structure::AR1}, {"a", 3, Structure::AR1}}), PartitionError);
  CHECK_THROWS_AS(BlockPartition(std::vector<BlockSpec>{}), PartitionError);
  const auto data = sequential_panel(2, 5, 1);
  CHECK_THROWS_AS(partition_dataset(data, BlockPartition({{"a", 2, Structure::AR1}, {"b", 2, Structure::AR1}})),
                  PartitionError);
  const BlockPartition part({{"a", 2, Structure::AR1}, {"b", 3, Structure::AR1}});
  CHECK(part.index_of("b") == 1);
  CHECK_THROWS_AS((void)part.index_of("zz"), PartitionError);
  const auto cs = part.with_structure(Structure::CS);
  CHECK(cs.block(0).structure == Structure::CS);
  CHECK(cs.block(1).size == 3);
}

TEST_CASE("panel dataset validates its shape and values") {
  CHECK_THROWS_AS(PanelDataset(MatrixXd::Zero(1, 3), MatrixXd::Zero(3, 1)), IngestionError);
  CHECK_THROWS_AS(PanelDataset(MatrixXd::Zero(2, 3), MatrixXd::Zero(5, 1)), IngestionError);
  MatrixXd y = MatrixXd::Zero(2, 2);
  y(1, 1) = std::nan("");
  CHECK_THROWS_AS(PanelDataset(y, MatrixXd::Zero(4, 1)), IngestionError);
}

TEST_CASE("pair_correlation follows the structure") {
  CHECK(pair_correlation({Structure::AR1, 2.0, 0.5}, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pair_correlation({Structure::AR1, 2.0, 0.5}, 3) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(pair_correlation({Structure::CS, 1.0, 0.3}, 7) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(pair_correlation({Structure::AR1, 1.0, 0.5}, 0), DomainError);
  for (double rho : {-0.99, -0.3, 0.0, 0.7, 0.999}) {
    for (std::size_t lag = 1; lag < 12; ++lag) CHECK(std::abs(pair_correlation({Structure::AR1, 1.0, rho}, lag)) < 1.0);
  }
}

TEST_CASE("dependence validation enforces sigma > 0 and the CS lower bound") {
  CHECK_NOTHROW(DependenceKind({Structure::CS, 1.0, -0.45}).validate(3));
  CHECK_THROWS_AS(DependenceKind({Structure::CS, 1.0, -0.5}).validate(3), DomainError);
  CHECK_THROWS_AS(DependenceKind({Structure::AR1, 0.0, 0.1}).validate(3), DomainError);
  CHECK_THROWS_AS(DependenceKind({Structure::AR1, 1.0, 1.0}).validate(3), DomainError);
  const auto [lo, hi] = DependenceKind::rho_bounds(Structure::CS, 5);
  CHECK(lo == doctest::Approx(-0.25));
  CHECK(hi == doctest::Approx(1.0));
  CHECK(structure_from_string("CS") == Structure::CS);
  CHECK_THROWS_AS(structure_from_string("toeplitz"), ConfigError);
}

TEST_CASE("pair covariance rejects invalid parameters") {
  CHECK_THROWS_AS(PairCovariance(0.0, 0.1), DomainError);
  CHECK_THROWS_AS(PairCovariance(1.0, 1.0), DomainError);
  const PairCovariance pc(2.0, 0.5);
  CHECK((pc.matrix() * pc.inverse() - Eigen::Matrix2d::Identity()).norm() < 1e-14);
  CHECK(pc.log_determinant() == doctest::Approx(std::log(pc.matrix().determinant())).epsilon(1e-14));
}

TEST_CASE("Kronecker assembly: identity S gives block-diagonal copies of A") {
  const MatrixXd a = ar1_matrix({1.0, 0.5}, 2, 2);
  const MatrixXd sigma = assemble_kronecker(MatrixXd::Identity(2, 2), {{1.0, 0.5}, {1.0, 0.5}}, {2, 2});
  MatrixXd expect = MatrixXd::Zero(4, 4);
  expect.topLeftCorner(2, 2) = a;
  expect.bottomRightCorner(2, 2) = a;
  CHECK((sigma - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Kronecker assembly: scalar A returns S") {
  MatrixXd s(2, 2);
  s << 1.0, 0.5, 0.5, 1.0;
  const MatrixXd sigma = assemble_kronecker(s, {{1.0, 0.5}, {1.0, 0.5}}, {1, 1});
  CHECK((sigma - s).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Kronecker assembly matches an elementwise Kronecker oracle") {
  const MatrixXd s = random_correlation_matrix(5, 7, 0.5, 0.1);
  const std::size_t m = 10;
  const MatrixXd sigma = assemble_kronecker(s, std::vector<Ar1Spec>(5, {2.0, 0.5}), std::vector<std::size_t>(5, m));
  REQUIRE(sigma.rows() == 50);
  for (std::size_t r = 0; r < 50; ++r) {
    for (std::size_t c = 0; c < 50; ++c) {
      const double a = 4.0 * std::pow(0.5, std::abs(static_cast<double>(r % m) - static_cast<double>(c % m)));
      const double expect = s(static_cast<Eigen::Index>(r / m), static_cast<Eigen::Index>(c / m)) * a;
      CHECK(std::abs(sigma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - expect) <= 1e-15);
    }
  }
  CHECK(sigma(0, 10) == doctest::Approx(s(0, 1) * 4.0));
  CHECK(is_symmetric_positive_definite(sigma));
}

TEST_CASE("Kronecker assembly with unequal sizes stays positive definite") {
  const MatrixXd s = random_correlation_matrix(5, 11, 0.5, 0.1);
  const MatrixXd sigma = assemble_kronecker(s, std::vector<Ar1Spec>(5, {2.0, 0.5}), {12, 10, 13, 8, 7});
  CHECK(sigma.rows() == 50);
  CHECK(is_symmetric_positive_definite(sigma));
  const Eigen::LLT<MatrixXd> llt(sigma);
  CHECK(llt.matrixLLT().diagonal().minCoeff() > 0.0);
}

TEST_CASE("Kronecker assembly rejects a non-PD between-block factor") {
  MatrixXd s(2, 2);
  s << 1.0, 1.5, 1.5, 1.0;
  CHECK_THROWS_AS(assemble_kronecker(s, {{1.0, 0.5}, {1.0, 0.5}}, {2, 2}), CovarianceError);
}

TEST_CASE("random correlation matrix is deterministic, unit-diagonal and PD") {
  const MatrixXd a = random_correlation_matrix(6, 42, 0.5, 0.1);
  const MatrixXd b = random_correlation_matrix(6, 42, 0.5, 0.1);
  CHECK(a == b);
  CHECK((a.diagonal().array() - 1.0).abs().maxCoeff() < 1e-15);
  CHECK(is_symmetric_positive_definite(a));
  CHECK(a != random_correlation_matrix(6, 43, 0.5, 0.1));
}
