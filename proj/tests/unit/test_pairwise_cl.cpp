#include "dimm/bivariate_normal.hpp"
#include "dimm/error.hpp"
#include "dimm/pairwise_cl.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace dimm;
using dimm::testing::random_block;
using dimm::testing::rel_err;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Bivariate normal log density with the 2x2 inverse written out by hand.
double logpdf_oracle(double y1, double y2, double m1, double m2, double sigma, double c) {
  const double s2 = sigma * sigma;
  const double det = s2 * s2 * (1.0 - c * c);
  const double a = y1 - m1, b = y2 - m2;
  const double quad = (s2 * a * a - 2.0 * c * s2 * a * b + s2 * b * b) / det;
  return -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad;
}

// Double loop over subjects and pairs, density by the oracle above.
double logcl_oracle(const VectorXd& beta, const DependenceKind& g, const BlockData& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < b.n_subjects(); ++i) {
    const VectorXd mu = b.subject_covariates(i) * beta;
    for (std::size_t r = 0; r < b.block_size(); ++r) {
      for (std::size_t t = r + 1; t < b.block_size(); ++t) {
        const auto ri = static_cast<Eigen::Index>(r), ti = static_cast<Eigen::Index>(t);
        total += logpdf_oracle(b.responses(static_cast<Eigen::Index>(i), ri), b.responses(static_cast<Eigen::Index>(i), ti),
                               mu(ri), mu(ti), g.sigma, pair_correlation(g, t - r));
      }
    }
  }
  return total;
}

// Per-subject log-CL, used for central differences of the scores.
double subject_logcl(const VectorXd& beta, const DependenceKind& g, const BlockData& b, std::size_t i) {
  BlockData one;
  one.name = b.name;
  one.responses = b.responses.row(static_cast<Eigen::Index>(i));
  one.covariates = b.subject_covariates(i);
  return block_logcl(beta, g, one);
}

}  // namespace

TEST_CASE("bivariate normal log density examples") {
  const PairCovariance id(1.0, 0.0);
  CHECK(bivariate_normal_logpdf({0, 0}, {0, 0}, id) == doctest::Approx(-kLog2Pi).epsilon(1e-15));
  CHECK(bivariate_normal_logpdf({0, 0}, {0, 0}, id) == doctest::Approx(-1.837877).epsilon(1e-6));
  CHECK(bivariate_normal_logpdf({1, 1}, {0, 0}, id) == doctest::Approx(-kLog2Pi - 1.0).epsilon(1e-15));
  const double v = bivariate_normal_logpdf({1, 1}, {0, 0}, PairCovariance(1.0, 0.5));
  CHECK(std::abs(v - logpdf_oracle(1, 1, 0, 0, 1.0, 0.5)) < 1e-14);
  CHECK(std::isfinite(bivariate_normal_logpdf({3, -2}, {0.5, 1}, PairCovariance(0.2, -0.99))));
}

TEST_CASE("block_logcl enumerates every pair") {
  std::mt19937_64 rng(1);
  SUBCASE("m=2, N=1 is a single bivariate term") {
    const auto b = random_block(rng, 1, 2, 1, VectorXd::Constant(1, 0.5), 1.3, 0.4);
    const DependenceKind g{Structure::AR1, 1.3, 0.4};
    const VectorXd beta = VectorXd::Constant(1, 0.5);
    const double direct = bivariate_normal_logpdf(b.responses.row(0).transpose(), b.covariates * beta,
                                                  PairCovariance(1.3, 0.4));
    CHECK(std::abs(block_logcl(beta, g, b) - direct) < 1e-13);
  }
  SUBCASE("m=3, N=2 sums six independent logpdf calls") {
    const VectorXd beta = VectorXd::Constant(2, 0.2);
    const auto b = random_block(rng, 2, 3, 2, beta, 0.8, 0.3);
    const DependenceKind g{Structure::AR1, 0.8, 0.3};
    double sum = 0.0;
    int terms = 0;
    for (std::size_t i = 0; i < 2; ++i) {
      const VectorXd mu = b.subject_covariates(i) * beta;
      for (int r = 0; r < 3; ++r) {
        for (int t = r + 1; t < 3; ++t) {
          sum += bivariate_normal_logpdf({b.responses(static_cast<Eigen::Index>(i), r), b.responses(static_cast<Eigen::Index>(i), t)},
                                         {mu(r), mu(t)}, PairCovariance(0.8, std::pow(0.3, t - r)));
          ++terms;
        }
      }
    }
    CHECK(terms == 6);
    CHECK(std::abs(block_logcl(beta, g, b) - sum) < 1e-12);
  }
  SUBCASE("random instances agree with the double-loop oracle") {
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t m = 2 + static_cast<std::size_t>(rep % 5);
      const std::size_t p = 1 + static_cast<std::size_t>(rep % 3);
      const VectorXd beta = VectorXd::LinSpaced(static_cast<Eigen::Index>(p), -0.5, 0.7);
      const auto b = random_block(rng, 7, m, p, beta, 1.5, 0.4);
      for (auto s : {Structure::AR1, Structure::CS}) {
        const DependenceKind g{s, 1.1, 0.35};
        const VectorXd at = beta.array() + 0.1;
        CHECK(rel_err(block_logcl(at, g, b), logcl_oracle(at, g, b)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("block_score_beta") {
  std::mt19937_64 rng(2);
  SUBCASE("zero residuals give a zero matrix") {
    BlockData b = random_block(rng, 5, 4, 2, VectorXd::Ones(2), 1.0, 0.2);
    const VectorXd beta(VectorXd::Ones(2));
    for (std::size_t i = 0; i < 5; ++i) b.responses.row(static_cast<Eigen::Index>(i)) = (b.subject_covariates(i) * beta).transpose();
    const MatrixXd s = block_score_beta(beta, {Structure::AR1, 1.3, 0.5}, b);
    CHECK(s.rows() == 5);
    CHECK(s.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("p=1, m=2, c=0 reduces to (x_r e_r + x_t e_t) / sigma^2") {
    const auto b = random_block(rng, 4, 2, 1, VectorXd::Constant(1, 0.3), 1.0, 0.0, false);
    const VectorXd beta = VectorXd::Constant(1, 0.1);
    const double sigma = 1.7;
    const MatrixXd s = block_score_beta(beta, {Structure::CS, sigma, 0.0}, b);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto x = b.subject_covariates(i);
      const auto ii = static_cast<Eigen::Index>(i);
      const double er = b.responses(ii, 0) - x(0, 0) * 0.1, et = b.responses(ii, 1) - x(1, 0) * 0.1;
      CHECK(std::abs(s(ii, 0) - (x(0, 0) * er + x(1, 0) * et) / (sigma * sigma)) < 1e-14);
    }
  }
  SUBCASE("random instances agree with central differences") {
    for (int rep = 0; rep < 25; ++rep) {
      const std::size_t m = 2 + static_cast<std::size_t>(rep % 5);
      const std::size_t p = 1 + static_cast<std::size_t>(rep % 4);
      const auto b = random_block(rng, 6, m, p, VectorXd::Zero(static_cast<Eigen::Index>(p)), 1.0, 0.5);
      const DependenceKind g{rep % 2 ? Structure::CS : Structure::AR1, 0.9, 0.3};
      const VectorXd beta = VectorXd::Constant(static_cast<Eigen::Index>(p), 0.2);
      const MatrixXd s = block_score_beta(beta, g, b);
      for (std::size_t i = 0; i < b.n_subjects(); ++i) {
        for (std::size_t k = 0; k < p; ++k) {
          VectorXd up = beta, dn = beta;
          const double h = 1e-5;
          up(static_cast<Eigen::Index>(k)) += h;
          dn(static_cast<Eigen::Index>(k)) -= h;
          const double fd = (subject_logcl(up, g, b, i) - subject_logcl(dn, g, b, i)) / (2 * h);
          CHECK(rel_err(s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)), fd) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("block_score_gamma") {
  std::mt19937_64 rng(3);
  const VectorXd beta0 = (VectorXd(2) << 0.5, -0.4).finished();
  const auto b = random_block(rng, 300, 5, 2, beta0, 2.0, 0.5);

  SUBCASE("vanishes at the joint MCLE") {
    const auto fit = fit_block(b, Structure::AR1);
    const auto g = block_score_gamma(fit.beta_hat, fit.gamma_hat, b);
    CHECK(std::abs(g(0)) <= 1e-4);
    CHECK(std::abs(g(1)) <= 1e-4);
  }
  SUBCASE("sigma-derivative is negative far above the truth") {
    CHECK(block_score_gamma(beta0, {Structure::AR1, 20.0, 0.5}, b)(0) < 0.0);
  }
  SUBCASE("matches the closed-form sigma-derivative when c = 0") {
    const double sigma = 1.6;
    const auto g = block_score_gamma(beta0, {Structure::CS, sigma, 0.0}, b);
    double total = 0.0;
    for (std::size_t i = 0; i < b.n_subjects(); ++i) {
      const VectorXd e = b.responses.row(static_cast<Eigen::Index>(i)).transpose() - b.subject_covariates(i) * beta0;
      for (Eigen::Index r = 0; r < e.size(); ++r) {
        for (Eigen::Index t = r + 1; t < e.size(); ++t) {
          total += -2.0 / sigma + (e(r) * e(r) + e(t) * e(t)) / (sigma * sigma * sigma);
        }
      }
    }
    CHECK(rel_err(g(0), total / static_cast<double>(b.n_subjects())) <= 1e-6);
  }
}

TEST_CASE("lag moments reproduce the pair-by-pair log-CL and its gradients") {
  std::mt19937_64 rng(4);
  for (auto s : {Structure::AR1, Structure::CS}) {
    const VectorXd beta0 = (VectorXd(3) << 0.3, 1.0, -0.5).finished();
    const auto b = random_block(rng, 40, 6, 3, beta0, 1.4, 0.6);
    const PairwiseMoments mom(b, beta0);
    const VectorXd beta = beta0.array() + 0.05;
    const DependenceKind g{s, 1.2, 0.4};
    CHECK(rel_err(mom.logcl(beta, g), block_logcl(beta, g, b)) <= 1e-12);
    const VectorXd grad = mom.gradient_beta(beta, g);
    const VectorXd summed = block_score_beta(beta, g, b).colwise().sum().transpose();
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(rel_err(grad(k), summed(k)) <= 1e-10);
    const auto gg = mom.gradient_gamma(beta, g);
    const double h = 1e-6;
    const double ds = (mom.logcl(beta, {s, 1.2 + h, 0.4}) - mom.logcl(beta, {s, 1.2 - h, 0.4})) / (2 * h);
    const double dr = (mom.logcl(beta, {s, 1.2, 0.4 + h}) - mom.logcl(beta, {s, 1.2, 0.4 - h})) / (2 * h);
    CHECK(rel_err(gg(0), ds) <= 1e-6);
    CHECK(rel_err(gg(1), dr) <= 1e-6);
  }
}

TEST_CASE("block_sensitivity") {
  std::mt19937_64 rng(5);
  SUBCASE("p=1, m=2, c=0, x=1 gives 2 / sigma^2") {
    BlockData b;
    b.name = "b";
    b.responses = MatrixXd::Random(3, 2);
    b.covariates = MatrixXd::Ones(6, 1);
    const MatrixXd s = block_sensitivity({Structure::CS, 1.5, 0.0}, b);
    CHECK(s(0, 0) == doctest::Approx(2.0 / 2.25).epsilon(1e-14));
  }
  SUBCASE("equals minus the Jacobian of the mean score") {
    const auto b = random_block(rng, 30, 5, 3, VectorXd::Ones(3), 1.0, 0.5);
    const DependenceKind g{Structure::AR1, 1.1, 0.45};
    const MatrixXd s = block_sensitivity(g, b);
    const VectorXd beta = VectorXd::Constant(3, 0.7);
    for (Eigen::Index k = 0; k < 3; ++k) {
      VectorXd up = beta, dn = beta;
      up(k) += 1e-5;
      dn(k) -= 1e-5;
      const VectorXd col = -(block_score_beta(up, g, b).colwise().mean() - block_score_beta(dn, g, b).colwise().mean()).transpose() / 2e-5;
      for (Eigen::Index r = 0; r < 3; ++r) CHECK(rel_err(s(r, k), col(r)) <= 1e-6);
    }
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(s).eigenvalues().minCoeff() > 0.0);
  }
  SUBCASE("doubling the covariates quadruples the matrix") {
    auto b = random_block(rng, 10, 4, 2, VectorXd::Ones(2), 1.0, 0.3);
    const DependenceKind g{Structure::CS, 0.8, 0.2};
    const MatrixXd s1 = block_sensitivity(g, b);
    b.covariates *= 2.0;
    const MatrixXd s2 = block_sensitivity(g, b);
    CHECK(((s2 - 4.0 * s1).cwiseAbs().maxCoeff()) <= 1e-12 * s1.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("fit_block recovers noiseless coefficients") {
  std::mt19937_64 rng(6);
  const VectorXd beta0 = (VectorXd(3) << 0.3, 0.6, -0.8).finished();
  const auto b = random_block(rng, 60, 5, 3, beta0, 1e-7, 0.3);
  const auto fit = fit_block(b, Structure::AR1);
  CHECK((fit.beta_hat - beta0).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(fit.trace.converged);
}

TEST_CASE("fit_block with m=2 and subject-level covariates equals pooled OLS") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  BlockData b;
  b.name = "pair";
  const std::size_t n = 80;
  b.responses.resize(n, 2);
  b.covariates.resize(2 * n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = z(rng);
    for (int r = 0; r < 2; ++r) {
      b.covariates(static_cast<Eigen::Index>(2 * i) + r, 0) = 1.0;
      b.covariates(static_cast<Eigen::Index>(2 * i) + r, 1) = x;
      b.responses(static_cast<Eigen::Index>(i), r) = 0.5 + 1.5 * x + z(rng);
    }
  }
  const auto fit = fit_block(b, Structure::CS);
  // Pooled OLS over all 2N rows, solved by normal equations.
  MatrixXd xtx = b.covariates.transpose() * b.covariates;
  VectorXd y(2 * n);
  for (std::size_t i = 0; i < n; ++i) y.segment(static_cast<Eigen::Index>(2 * i), 2) = b.responses.row(static_cast<Eigen::Index>(i)).transpose();
  const VectorXd ols = xtx.ldlt().solve(b.covariates.transpose() * y);
  CHECK((fit.beta_hat - ols).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("fit_block is consistent over Monte-Carlo replicates") {
  std::mt19937_64 rng(8);
  const VectorXd beta0 = (VectorXd(2) << 0.3, 0.6).finished();
  const int reps = 200;
  MatrixXd est(reps, 2);
  for (int r = 0; r < reps; ++r) {
    const auto b = random_block(rng, 100, 6, 2, beta0, 2.0, 0.5);
    est.row(r) = fit_block(b, Structure::AR1).beta_hat.transpose();
  }
  for (Eigen::Index k = 0; k < 2; ++k) {
    const double mean = est.col(k).mean();
    const double sd = std::sqrt((est.col(k).array() - mean).square().sum() / (reps - 1));
    CHECK(std::abs(mean - beta0(k)) <= 3.0 * sd / std::sqrt(static_cast<double>(reps)));
  }
}

TEST_CASE("fitted block satisfies its score equations and is start-invariant") {
  std::mt19937_64 rng(9);
  const VectorXd beta0 = (VectorXd(3) << 0.3, 0.6, 0.8).finished();
  for (auto s : {Structure::AR1, Structure::CS}) {
    const auto b = random_block(rng, 200, 7, 3, beta0, 2.0, 0.5);
    const auto fit = fit_block(b, s);
    CHECK(fit.subject_scores.colwise().mean().cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(Eigen::LLT<MatrixXd>(fit.sensitivity).info() == Eigen::Success);

    FitOptions alt;
    alt.start_sigma = 2.0;
    alt.start_rho = 0.1;
    const auto fit2 = fit_block(b, s, alt);
    CHECK(std::abs(fit2.logcl_at_optimum - fit.logcl_at_optimum) <= 1e-6);
    CHECK(std::abs(fit.logcl_at_optimum - block_logcl(fit.beta_hat, fit.gamma_hat, b)) <= 1e-8 * std::abs(fit.logcl_at_optimum));
  }
}

TEST_CASE("fit_block fails fast on degenerate inputs") {
  std::mt19937_64 rng(10);
  auto b = random_block(rng, 20, 4, 3, VectorXd::Ones(3), 1.0, 0.2);
  b.covariates.col(2) = 2.0 * b.covariates.col(1);
  CHECK_THROWS_AS(fit_block(b, Structure::AR1), SingularityError);

  const auto small = random_block(rng, 2, 3, 3, VectorXd::Ones(3), 1.0, 0.2);
  CHECK_THROWS_AS(fit_block(small, Structure::AR1), FitError);
}

TEST_CASE("fit_blocks returns block order regardless of worker count") {
  std::mt19937_64 rng(11);
  std::vector<BlockData> blocks;
  for (int j = 0; j < 6; ++j) blocks.push_back(random_block(rng, 50, 3 + j % 3, 2, VectorXd::Ones(2), 1.0, 0.4, true, "b" + std::to_string(j)));
  const std::vector<Structure> st(6, Structure::AR1);
  const auto one = fit_blocks(blocks, st, {}, 1);
  const auto four = fit_blocks(blocks, st, {}, 4);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(one[j].name == "b" + std::to_string(j));
    CHECK(one[j].beta_hat == four[j].beta_hat);
    CHECK(one[j].subject_scores == four[j].subject_scores);
  }
}

TEST_CASE("gamma transform round-trips inside the admissible range") {
  const GammaTransform tr(Structure::CS, 4);
  CHECK(tr.rho_lo == doctest::Approx(-1.0 / 3.0));
  for (double rho : {-0.3, 0.0, 0.5, 0.95}) {
    const auto th = tr.to_theta({Structure::CS, 1.7, rho});
    const auto g = tr.to_gamma(th(0), th(1));
    CHECK(g.sigma == doctest::Approx(1.7).epsilon(1e-14));
    CHECK(g.rho == doctest::Approx(rho).epsilon(1e-12));
  }
}
