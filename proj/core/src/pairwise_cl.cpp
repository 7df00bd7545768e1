#include "dimm/pairwise_cl.hpp"

#include "dimm/bivariate_normal.hpp"
#include "dimm/covariance.hpp"
#include "dimm/optimizer.hpp"
#include "dimm/parallel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace dimm {

namespace {

void check_block(const VectorXd& beta, const BlockData& block) {
  if (static_cast<std::size_t>(beta.size()) != block.n_covariates()) {
    std::ostringstream os;
    os << "block '" << block.name << "': beta has length " << beta.size() << " but the block has "
       << block.n_covariates() << " covariates";
    throw DomainError(os.str());
  }
}

}  // namespace

MatrixXd pair_weight_matrix(const DependenceKind& gamma, std::size_t block_size) {
  gamma.validate(block_size);
  const auto m = static_cast<Eigen::Index>(block_size);
  MatrixXd w = MatrixXd::Zero(m, m);
  const double s2 = gamma.sigma * gamma.sigma;
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index t = r + 1; t < m; ++t) {
      const double c = pair_correlation(gamma, static_cast<std::size_t>(t - r));
      const double k = 1.0 / (s2 * (1.0 - c * c));
      w(r, r) += k;
      w(t, t) += k;
      w(r, t) = w(t, r) = -c * k;
    }
  }
  return w;
}

double block_logcl(const VectorXd& beta, const DependenceKind& gamma, const BlockData& block) {
  check_block(beta, block);
  const auto m = block.block_size();
  gamma.validate(m);
  std::vector<PairCovariance> omegas;
  omegas.reserve(m);
  for (std::size_t lag = 1; lag < m; ++lag) omegas.emplace_back(gamma.sigma, pair_correlation(gamma, lag));

  double total = 0.0;
  for (std::size_t i = 0; i < block.n_subjects(); ++i) {
    const VectorXd mu = block.subject_covariates(i) * beta;
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t r = 0; r + 1 < m; ++r) {
      for (std::size_t t = r + 1; t < m; ++t) {
        const auto ri = static_cast<Eigen::Index>(r);
        const auto ti = static_cast<Eigen::Index>(t);
        const Eigen::Vector2d y(block.responses(row, ri), block.responses(row, ti));
        const Eigen::Vector2d mu_pair(mu(ri), mu(ti));
        total += bivariate_normal_logpdf(y, mu_pair, omegas[t - r - 1]);
      }
    }
  }
  return total;
}

MatrixXd block_score_beta(const VectorXd& beta, const DependenceKind& gamma, const BlockData& block) {
  check_block(beta, block);
  const MatrixXd w = pair_weight_matrix(gamma, block.block_size());
  const auto n = static_cast<Eigen::Index>(block.n_subjects());
  MatrixXd scores(n, beta.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto x = block.subject_covariates(static_cast<std::size_t>(i));
    const VectorXd e = block.responses.row(i).transpose() - x * beta;
    scores.row(i) = (x.transpose() * (w * e)).transpose();
  }
  return scores;
}

MatrixXd block_sensitivity(const DependenceKind& gamma, const BlockData& block) {
  const MatrixXd w = pair_weight_matrix(gamma, block.block_size());
  const auto p = static_cast<Eigen::Index>(block.n_covariates());
  MatrixXd s = MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < block.n_subjects(); ++i) {
    const auto x = block.subject_covariates(i);
    s.noalias() += x.transpose() * w * x;
  }
  s /= static_cast<double>(block.n_subjects());
  return 0.5 * (s + s.transpose());
}

GammaTransform::GammaTransform(Structure s, std::size_t block_size) : structure(s) {
  std::tie(rho_lo, rho_hi) = DependenceKind::rho_bounds(s, block_size);
}

DependenceKind GammaTransform::to_gamma(double t1, double t2) const {
  return {structure, std::exp(t1), rho_lo + (rho_hi - rho_lo) * 0.5 * (std::tanh(t2) + 1.0)};
}

Eigen::Vector2d GammaTransform::to_theta(const DependenceKind& gamma) const {
  const double u = 2.0 * (gamma.rho - rho_lo) / (rho_hi - rho_lo) - 1.0;
  return {std::log(gamma.sigma), std::atanh(u)};
}

double GammaTransform::drho_dt2(double t2) const {
  const double th = std::tanh(t2);
  return 0.5 * (rho_hi - rho_lo) * (1.0 - th * th);
}

Eigen::Vector2d block_score_gamma(const VectorXd& beta, const DependenceKind& gamma, const BlockData& block) {
  check_block(beta, block);
  const auto m = block.block_size();
  gamma.validate(m);
  const GammaTransform tr(gamma.structure, m);
  const Eigen::Vector2d theta = tr.to_theta(gamma);
  const double n = static_cast<double>(block.n_subjects());

  auto mean_logcl = [&](const Eigen::Vector2d& th) {
    const auto g = tr.to_gamma(th(0), th(1));
    g.validate(m);
    return block_logcl(beta, g, block) / n;
  };

  Eigen::Vector2d d_theta;
  for (int k = 0; k < 2; ++k) {
    double h = 1e-6 * std::max(1.0, std::abs(theta(k)));
    for (int attempt = 0;; ++attempt) {
      Eigen::Vector2d up = theta;
      Eigen::Vector2d dn = theta;
      up(k) += h;
      dn(k) -= h;
      try {
        const double fu = mean_logcl(up);
        const double fd = mean_logcl(dn);
        if (std::isfinite(fu) && std::isfinite(fd)) {
          d_theta(k) = (fu - fd) / (2.0 * h);
          break;
        }
      } catch (const DomainError&) {
        if (attempt >= 30) throw;
      }
      if (attempt >= 30) throw DomainError("block_score_gamma: no admissible finite-difference step");
      h *= 0.5;
    }
  }
  return {d_theta(0) / gamma.sigma, d_theta(1) / tr.drho_dt2(theta(1))};
}

PairwiseMoments::PairwiseMoments(const BlockData& block, const VectorXd& reference_beta)
    : n_(block.n_subjects()), m_(block.block_size()), reference_(reference_beta) {
  check_block(reference_beta, block);
  const auto p = static_cast<Eigen::Index>(block.n_covariates());
  const auto m = static_cast<Eigen::Index>(m_);
  lags_.resize(m_ - 1);
  for (std::size_t l = 1; l < m_; ++l) {
    auto& lag = lags_[l - 1];
    lag.n_pairs = static_cast<double>(n_ * (m_ - l));
    for (auto* q : {&lag.squares, &lag.cross}) {
      q->xy = VectorXd::Zero(p);
      q->xx = MatrixXd::Zero(p, p);
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    const auto x = block.subject_covariates(i);
    const VectorXd e = block.responses.row(static_cast<Eigen::Index>(i)).transpose() - x * reference_beta;
    for (Eigen::Index l = 1; l < m; ++l) {
      auto& lag = lags_[static_cast<std::size_t>(l - 1)];
      const auto len = m - l;
      const auto x_lo = x.topRows(len);
      const auto x_hi = x.bottomRows(len);
      const auto e_lo = e.head(len);
      const auto e_hi = e.tail(len);

      lag.squares.yy += e_lo.squaredNorm() + e_hi.squaredNorm();
      lag.squares.xy.noalias() += x_lo.transpose() * e_lo + x_hi.transpose() * e_hi;
      lag.squares.xx.noalias() += x_lo.transpose() * x_lo + x_hi.transpose() * x_hi;

      lag.cross.yy += e_lo.dot(e_hi);
      lag.cross.xy.noalias() += 0.5 * (x_lo.transpose() * e_hi + x_hi.transpose() * e_lo);
      const MatrixXd xt = x_lo.transpose() * x_hi;
      lag.cross.xx.noalias() += 0.5 * (xt + xt.transpose());
    }
  }
}

double PairwiseMoments::logcl(const VectorXd& beta, const DependenceKind& gamma) const {
  const VectorXd delta = beta - reference_;
  const double s2 = gamma.sigma * gamma.sigma;
  const double log_norm = -std::log(2.0 * std::numbers::pi) - std::log(s2);
  double total = 0.0;
  for (std::size_t l = 1; l < m_; ++l) {
    const auto& lag = lags_[l - 1];
    const double c = pair_correlation(gamma, l);
    const double omc2 = 1.0 - c * c;
    const double quad = lag.squares.value(delta) - 2.0 * c * lag.cross.value(delta);
    total += lag.n_pairs * (log_norm - 0.5 * std::log(omc2)) - quad / (2.0 * s2 * omc2);
  }
  return total;
}

VectorXd PairwiseMoments::gradient_beta(const VectorXd& beta, const DependenceKind& gamma) const {
  const VectorXd delta = beta - reference_;
  const double s2 = gamma.sigma * gamma.sigma;
  VectorXd g = VectorXd::Zero(beta.size());
  for (std::size_t l = 1; l < m_; ++l) {
    const auto& lag = lags_[l - 1];
    const double c = pair_correlation(gamma, l);
    const double k = 1.0 / (2.0 * s2 * (1.0 - c * c));
    g -= k * (lag.squares.grad(delta) - 2.0 * c * lag.cross.grad(delta));
  }
  return g;
}

Eigen::Vector2d PairwiseMoments::gradient_gamma(const VectorXd& beta, const DependenceKind& gamma) const {
  const VectorXd delta = beta - reference_;
  const double sigma = gamma.sigma;
  const double s2 = sigma * sigma;
  double d_sigma = 0.0;
  double d_rho = 0.0;
  for (std::size_t l = 1; l < m_; ++l) {
    const auto& lag = lags_[l - 1];
    const double c = pair_correlation(gamma, l);
    const double omc2 = 1.0 - c * c;
    const double d = lag.squares.value(delta);
    const double cr = lag.cross.value(delta);
    const double quad = d - 2.0 * c * cr;
    d_sigma += -2.0 * lag.n_pairs / sigma + quad / (sigma * s2 * omc2);
    const double d_c = lag.n_pairs * c / omc2 + cr / (s2 * omc2) - c * quad / (s2 * omc2 * omc2);
    const double dc_drho =
        gamma.structure == Structure::CS ? 1.0 : static_cast<double>(l) * std::pow(gamma.rho, static_cast<double>(l - 1));
    d_rho += d_c * dc_drho;
  }
  return {d_sigma, d_rho};
}

BlockFit fit_block(const BlockData& block, Structure structure, const FitOptions& options) {
  const auto n = block.n_subjects();
  const auto m = block.block_size();
  const auto p = static_cast<Eigen::Index>(block.n_covariates());
  if (m < 2) throw FitError("block '" + block.name + "' has fewer than 2 coordinates");
  if (n <= static_cast<std::size_t>(p)) {
    std::ostringstream os;
    os << "block '" << block.name << "': need N > p, got N = " << n << ", p = " << p;
    throw FitError(os.str());
  }

  Eigen::ColPivHouseholderQR<MatrixXd> qr(block.covariates);
  if (qr.rank() < p) {
    std::ostringstream os;
    os << "block '" << block.name << "': covariate design has rank " << qr.rank() << " < p = " << p;
    throw SingularityError(os.str());
  }
  const VectorXd beta_ref = qr.solve(block.responses.transpose().reshaped());

  const PairwiseMoments moments(block, beta_ref);
  const GammaTransform tr(structure, m);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto unpack = [&](const VectorXd& x) { return tr.to_gamma(x(p), x(p + 1)); };
  auto objective = [&](const VectorXd& x) {
    const auto g = unpack(x);
    if (!(g.sigma > 0.0) || !std::isfinite(g.sigma) || !(g.rho > tr.rho_lo && g.rho < tr.rho_hi)) {
      return std::numeric_limits<double>::infinity();
    }
    return -moments.logcl(x.head(p), g) * inv_n;
  };
  auto gradient = [&](const VectorXd& x) {
    const auto g = unpack(x);
    VectorXd out(p + 2);
    out.head(p) = -moments.gradient_beta(x.head(p), g) * inv_n;
    const Eigen::Vector2d dg = moments.gradient_gamma(x.head(p), g);
    out(p) = -dg(0) * g.sigma * inv_n;
    out(p + 1) = -dg(1) * tr.drho_dt2(x(p + 1)) * inv_n;
    return out;
  };

  VectorXd x0(p + 2);
  if (options.start_beta) {
    if (options.start_beta->size() != p) throw FitError("start_beta has the wrong length");
    x0.head(p) = *options.start_beta;
  } else {
    x0.head(p).setOnes();
  }
  x0.tail(2) = tr.to_theta(DependenceKind{structure, options.start_sigma, options.start_rho});

  OptimizerTrace trace;
  optim::NelderMeadOptions nm_opts;
  nm_opts.max_iterations = options.simplex_max_iterations;
  nm_opts.relative_tolerance = options.simplex_relative_tolerance;
  const auto nm = optim::nelder_mead(objective, x0, nm_opts);
  trace.simplex_iterations = nm.iterations;
  trace.simplex_evaluations = nm.evaluations;
  trace.simplex_stalled = nm.converged;

  optim::BfgsOptions bf_opts;
  bf_opts.max_iterations = options.max_iterations;
  bf_opts.gradient_tolerance = options.gradient_tolerance;
  const VectorXd start = std::isfinite(nm.value) ? nm.x : x0;
  auto qn = optim::bfgs(objective, gradient, start, bf_opts);
  trace.quasi_newton_iterations = qn.iterations;
  if (!qn.converged && std::isfinite(qn.value)) {
    // With a tiny sigma the beta-curvature dwarfs the rounding noise in the
    // objective and the line search stalls. The beta-subproblem is quadratic,
    // so finish with exact Newton steps in beta at the current gamma. A beta
    // gradient below what a one-ulp change of beta can move counts as zero.
    const double eps = std::numeric_limits<double>::epsilon();
    for (int k = 0; k < 3 && !qn.converged; ++k) {
      const MatrixXd s = block_sensitivity(unpack(qn.x), block);
      qn.x.head(p) += s.ldlt().solve(-qn.gradient.head(p));
      qn.gradient = gradient(qn.x);
      const VectorXd floor = (16.0 * eps * (s.cwiseAbs() * qn.x.head(p).cwiseAbs()))
                                 .cwiseMax(options.gradient_tolerance);
      qn.gradient_norm = qn.gradient.cwiseAbs().maxCoeff();
      qn.converged = (qn.gradient.head(p).cwiseAbs().array() <= floor.array()).all() &&
                     qn.gradient.tail(2).cwiseAbs().maxCoeff() <= options.gradient_tolerance;
    }
  }
  trace.converged = qn.converged;
  trace.gradient_norm = qn.gradient_norm;
  if (!qn.converged) {
    std::ostringstream os;
    os << "block '" << block.name << "': quasi-Newton phase stopped after " << qn.iterations
       << " iterations with gradient sup-norm " << qn.gradient_norm;
    throw BlockFitError(os.str(), trace);
  }

  BlockFit fit;
  fit.name = block.name;
  fit.beta_hat = qn.x.head(p);
  fit.gamma_hat = unpack(qn.x);
  fit.subject_scores = block_score_beta(fit.beta_hat, fit.gamma_hat, block);
  fit.sensitivity = block_sensitivity(fit.gamma_hat, block);
  fit.logcl_at_optimum = moments.logcl(fit.beta_hat, fit.gamma_hat);
  fit.trace = trace;
  return fit;
}

std::vector<BlockFit> fit_blocks(const std::vector<BlockData>& blocks, const std::vector<Structure>& structures,
                                 const FitOptions& options, std::size_t workers) {
  if (structures.size() != blocks.size()) throw FitError("one structure per block is required");
  std::vector<BlockFit> fits(blocks.size());
  parallel_for(blocks.size(), workers, [&](std::size_t j) { fits[j] = fit_block(blocks[j], structures[j], options); });
  return fits;
}

}  // namespace dimm
