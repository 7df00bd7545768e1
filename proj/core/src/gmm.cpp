#include "dimm/gmm.hpp"

#include "dimm/distributions.hpp"
#include "dimm/error.hpp"
#include "dimm/parallel.hpp"

#include <cmath>
#include <sstream>

namespace dimm {

namespace {

void check_fits(const std::vector<BlockFit>& fits) {
  if (fits.empty()) throw StackingError("no block fits to stack");
  const auto n = fits.front().n_subjects();
  const auto p = fits.front().n_params();
  for (const auto& f : fits) {
    if (f.n_subjects() != n || f.n_params() != p || static_cast<std::size_t>(f.sensitivity.rows()) != p) {
      std::ostringstream os;
      os << "block '" << f.name << "' has N = " << f.n_subjects() << ", p = " << f.n_params() << "; expected N = " << n
         << ", p = " << p;
      throw StackingError(os.str());
    }
  }
}

// Rows [j p, (j+1) p) hold S_j.
MatrixXd stacked_sensitivities(const std::vector<BlockFit>& fits) {
  const auto p = static_cast<Eigen::Index>(fits.front().n_params());
  MatrixXd g(p * static_cast<Eigen::Index>(fits.size()), p);
  for (std::size_t j = 0; j < fits.size(); ++j) g.middleRows(static_cast<Eigen::Index>(j) * p, p) = fits[j].sensitivity;
  return g;
}

void check_weights(const std::vector<BlockFit>& fits, const WeightMatrix& weights) {
  const auto jp = static_cast<Eigen::Index>(fits.size() * fits.front().n_params());
  if (weights.v_hat_inv.rows() != jp || weights.v_hat_inv.cols() != jp) {
    throw IntegrationError("weight matrix dimension does not match J p");
  }
}

MatrixXd invert_spd(const MatrixXd& m, const char* what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw IntegrationError(std::string(what) + " is not positive definite");
  }
  MatrixXd inv = llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

StackedScores stack_scores(const std::vector<BlockFit>& fits) {
  check_fits(fits);
  const auto n = static_cast<Eigen::Index>(fits.front().n_subjects());
  const auto p = static_cast<Eigen::Index>(fits.front().n_params());
  StackedScores out;
  out.n_blocks = fits.size();
  out.n_params = static_cast<std::size_t>(p);
  out.psi.resize(n, p * static_cast<Eigen::Index>(fits.size()));
  for (std::size_t j = 0; j < fits.size(); ++j) {
    out.psi.middleCols(static_cast<Eigen::Index>(j) * p, p) = fits[j].subject_scores;
    out.block_names.push_back(fits[j].name);
  }
  return out;
}

WeightMatrix weight_matrix(const StackedScores& scores) {
  const auto n = static_cast<double>(scores.n_subjects());
  const auto jp = scores.psi.cols();
  WeightMatrix w;
  w.v_hat = (scores.psi.transpose() * scores.psi) / n;
  w.v_hat = 0.5 * (w.v_hat + w.v_hat.transpose());
  if (scores.n_subjects() <= static_cast<std::size_t>(jp)) {
    std::ostringstream os;
    os << "N = " << scores.n_subjects() << " does not exceed J p = " << jp
       << "; the weight matrix is rank deficient, consider fewer blocks";
    w.warning = os.str();
  }

  // A factorisation counts as failed when a pivot is non-positive or the
  // pivot ratio implies a condition number beyond ~1e14.
  auto factor_ok = [](const Eigen::LLT<MatrixXd>& llt) {
    if (llt.info() != Eigen::Success) return false;
    const VectorXd piv = llt.matrixLLT().diagonal();
    return piv.allFinite() && piv.minCoeff() > 1e-7 * piv.maxCoeff();
  };

  const MatrixXd eye = MatrixXd::Identity(jp, jp);
  Eigen::LLT<MatrixXd> llt(w.v_hat);
  if (factor_ok(llt)) {
    w.v_hat_inv = llt.solve(eye);
  } else {
    const double base = w.v_hat.trace() / static_cast<double>(jp);
    bool ok = false;
    for (double factor = 1e-8; factor <= 1e-2 * (1.0 + 1e-9); factor *= 10.0) {
      const double lambda = factor * base;
      llt.compute(w.v_hat + lambda * eye);
      if (factor_ok(llt)) {
        w.ridge_used = lambda;
        w.v_hat_inv = llt.solve(eye);
        ok = true;
        break;
      }
    }
    if (!ok) {
      std::ostringstream os;
      os << "weight matrix (J p = " << jp << ", N = " << scores.n_subjects()
         << ") is singular even with ridge 1e-2 trace/(Jp); integrate fewer blocks";
      throw SingularWeightError(os.str());
    }
  }
  w.v_hat_inv = 0.5 * (w.v_hat_inv + w.v_hat_inv.transpose());
  return w;
}

MatrixXd dimm_bread(const std::vector<BlockFit>& fits, const WeightMatrix& weights) {
  check_fits(fits);
  check_weights(fits, weights);
  const MatrixXd g = stacked_sensitivities(fits);
  MatrixXd bread = g.transpose() * weights.v_hat_inv * g;
  return 0.5 * (bread + bread.transpose());
}

VectorXd one_step_estimator(const std::vector<BlockFit>& fits, const WeightMatrix& weights) {
  const MatrixXd bread = dimm_bread(fits, weights);
  const auto p = static_cast<Eigen::Index>(fits.front().n_params());
  VectorXd sb(p * static_cast<Eigen::Index>(fits.size()));
  for (std::size_t j = 0; j < fits.size(); ++j) {
    sb.segment(static_cast<Eigen::Index>(j) * p, p) = fits[j].sensitivity * fits[j].beta_hat;
  }
  const VectorXd rhs = stacked_sensitivities(fits).transpose() * (weights.v_hat_inv * sb);
  Eigen::LLT<MatrixXd> llt(bread);
  if (llt.info() != Eigen::Success) throw IntegrationError("one-step bread matrix is not positive definite");
  return llt.solve(rhs);
}

MatrixXd dimm_covariance(const std::vector<BlockFit>& fits, const WeightMatrix& weights) {
  check_fits(fits);
  check_weights(fits, weights);
  const auto p = static_cast<Eigen::Index>(fits.front().n_params());
  MatrixXd total = MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    for (std::size_t j = 0; j < fits.size(); ++j) {
      const auto slice =
          weights.v_hat_inv.block(static_cast<Eigen::Index>(i) * p, static_cast<Eigen::Index>(j) * p, p, p);
      total.noalias() += fits[i].sensitivity * slice * fits[j].sensitivity;
    }
  }
  total *= static_cast<double>(fits.front().n_subjects());
  return invert_spd(0.5 * (total + total.transpose()), "DIMM information matrix");
}

VectorXd stacked_mean_scores(const VectorXd& beta, const std::vector<BlockData>& blocks,
                             const std::vector<BlockFit>& fits, std::size_t workers) {
  check_fits(fits);
  if (blocks.size() != fits.size()) throw StackingError("stacked_mean_scores: one data block per fit is required");
  const auto p = static_cast<Eigen::Index>(fits.front().n_params());
  if (beta.size() != p) throw DomainError("stacked_mean_scores: beta has the wrong length");
  VectorXd psi(p * static_cast<Eigen::Index>(fits.size()));
  parallel_for(fits.size(), workers, [&](std::size_t j) {
    if (blocks[j].n_subjects() != fits[j].n_subjects()) {
      throw StackingError("block '" + blocks[j].name + "' data and fit disagree on N");
    }
    psi.segment(static_cast<Eigen::Index>(j) * p, p) =
        block_score_beta(beta, fits[j].gamma_hat, blocks[j]).colwise().mean().transpose();
  });
  return psi;
}

double q_statistic(const VectorXd& beta, const std::vector<BlockData>& blocks, const std::vector<BlockFit>& fits,
                   const WeightMatrix& weights, std::size_t workers) {
  check_weights(fits, weights);
  const VectorXd psi = stacked_mean_scores(beta, blocks, fits, workers);
  const double q = static_cast<double>(fits.front().n_subjects()) * psi.dot(weights.v_hat_inv * psi);
  return std::max(q, 0.0);
}

double cef_log_density(const VectorXd& beta, const std::vector<BlockData>& blocks, const std::vector<BlockFit>& fits,
                       const WeightMatrix& weights, std::size_t workers) {
  return -0.5 * q_statistic(beta, blocks, fits, weights, workers);
}

GofResult gof_test(double q_stat, std::size_t n_blocks, std::size_t n_params) {
  if (n_blocks < 2) {
    throw TestUndefinedError("over-identification test needs at least 2 blocks (df = (J-1) p = 0 for J = 1)");
  }
  if (n_params == 0) throw TestUndefinedError("over-identification test needs p >= 1");
  if (!(q_stat >= 0.0)) throw DomainError("Q statistic must be non-negative");
  GofResult r;
  r.df = (n_blocks - 1) * n_params;
  r.p_value = chi2_sf(q_stat, static_cast<double>(r.df));
  return r;
}

std::vector<WaldResult> wald_tests(const VectorXd& estimate, const MatrixXd& covariance) {
  constexpr double kZ975 = 1.959963984540054;
  std::vector<WaldResult> out;
  out.reserve(static_cast<std::size_t>(estimate.size()));
  for (Eigen::Index q = 0; q < estimate.size(); ++q) {
    WaldResult w;
    w.estimate = estimate(q);
    w.std_error = std::sqrt(covariance(q, q));
    if (!std::isfinite(w.std_error) || !(w.std_error > 0.0)) {
      std::ostringstream os;
      os << "coefficient " << q << " has non-finite or zero standard error";
      throw IntegrationError(os.str());
    }
    w.z = w.estimate / w.std_error;
    w.p_value = normal_two_sided_p(w.z);
    w.ci_lower = w.estimate - kZ975 * w.std_error;
    w.ci_upper = w.estimate + kZ975 * w.std_error;
    out.push_back(w);
  }
  return out;
}

std::vector<WaldResult> wald_tests(const IntegratedFit& fit) { return wald_tests(fit.beta_dimm, fit.covariance); }

IntegratedFit integrate(const std::vector<BlockData>& blocks, const std::vector<BlockFit>& fits,
                        const std::vector<std::string>& subset, std::size_t workers) {
  if (blocks.size() != fits.size()) throw StackingError("integrate: one data block per fit is required");
  std::vector<BlockData> sel_blocks;
  std::vector<BlockFit> sel_fits;
  if (subset.empty()) {
    sel_blocks = blocks;
    sel_fits = fits;
  } else {
    for (std::size_t j = 0; j < fits.size(); ++j) {
      for (const auto& name : subset) {
        if (fits[j].name == name) {
          sel_blocks.push_back(blocks[j]);
          sel_fits.push_back(fits[j]);
        }
      }
    }
    for (const auto& name : subset) {
      bool found = false;
      for (const auto& f : fits) found = found || f.name == name;
      if (!found) throw PartitionError("sub-group block '" + name + "' not found among fitted blocks");
    }
  }

  const auto scores = stack_scores(sel_fits);
  const auto weights = weight_matrix(scores);
  const MatrixXd bread = dimm_bread(sel_fits, weights);

  IntegratedFit out;
  out.beta_dimm = one_step_estimator(sel_fits, weights);
  out.covariance = invert_spd(static_cast<double>(scores.n_subjects()) * bread, "DIMM information matrix");
  out.q_stat = q_statistic(out.beta_dimm, sel_blocks, sel_fits, weights, workers);
  if (sel_fits.size() >= 2) out.gof = gof_test(out.q_stat, sel_fits.size(), scores.n_params);
  out.wald = wald_tests(out.beta_dimm, out.covariance);
  for (const auto& f : sel_fits) out.blocks_used.push_back(f.name);
  out.ridge_used = weights.ridge_used;
  out.warning = weights.warning;
  return out;
}

}  // namespace dimm
