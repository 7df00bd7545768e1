#include "dimm/baselines.hpp"

#include "dimm/error.hpp"

#include <algorithm>
#include <cmath>

namespace dimm {

std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::GlsOracle:
      return "GLS_ORACLE";
    case BaselineMethod::GeeIndependence:
      return "GEE_IND";
    case BaselineMethod::GeeExchangeable:
      return "GEE_CS";
  }
  return "?";
}

namespace {

MatrixXd spd_inverse(const MatrixXd& m, const std::string& what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw SingularityError(what + " is singular");
  MatrixXd inv = llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

// Inverse of the exchangeable working matrix s2 [(1 - rho) I + rho 1 1'].
MatrixXd exchangeable_inverse(double s2, double rho, Eigen::Index m) {
  const double a = 1.0 / (s2 * (1.0 - rho));
  const double b = rho / (1.0 + static_cast<double>(m - 1) * rho);
  MatrixXd inv = MatrixXd::Constant(m, m, -a * b);
  inv.diagonal().array() += a;
  return inv;
}

struct WeightedFit {
  VectorXd beta;
  MatrixXd bread_inv;
};

WeightedFit weighted_least_squares(const PanelDataset& data, const MatrixXd& w) {
  const auto p = static_cast<Eigen::Index>(data.n_covariates());
  MatrixXd xtwx = MatrixXd::Zero(p, p);
  VectorXd xtwy = VectorXd::Zero(p);
  for (std::size_t i = 0; i < data.n_subjects(); ++i) {
    const auto x = data.subject_covariates(i);
    const MatrixXd xtw = x.transpose() * w;
    xtwx.noalias() += xtw * x;
    xtwy.noalias() += xtw * data.responses().row(static_cast<Eigen::Index>(i)).transpose();
  }
  WeightedFit out;
  out.bread_inv = spd_inverse(0.5 * (xtwx + xtwx.transpose()), "normal matrix");
  out.beta = out.bread_inv * xtwy;
  return out;
}

MatrixXd sandwich(const PanelDataset& data, const MatrixXd& w, const WeightedFit& fit) {
  const auto p = static_cast<Eigen::Index>(data.n_covariates());
  MatrixXd meat = MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < data.n_subjects(); ++i) {
    const auto x = data.subject_covariates(i);
    const VectorXd e = data.responses().row(static_cast<Eigen::Index>(i)).transpose() - x * fit.beta;
    const VectorXd u = x.transpose() * (w * e);
    meat.noalias() += u * u.transpose();
  }
  MatrixXd cov = fit.bread_inv * meat * fit.bread_inv;
  return 0.5 * (cov + cov.transpose());
}

}  // namespace

BaselineFit gls_oracle(const PanelDataset& data, const MatrixXd& sigma) {
  const auto m = static_cast<Eigen::Index>(data.response_dim());
  if (sigma.rows() != m || sigma.cols() != m) throw CovarianceError("GLS oracle covariance must be M x M");
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw CovarianceError("GLS oracle covariance is not positive definite");
  const MatrixXd sigma_inv = llt.solve(MatrixXd::Identity(m, m));
  const auto fit = weighted_least_squares(data, 0.5 * (sigma_inv + sigma_inv.transpose()));
  BaselineFit out;
  out.method = BaselineMethod::GlsOracle;
  out.beta_hat = fit.beta;
  out.covariance = fit.bread_inv;
  out.iterations = 1;
  out.converged = true;
  return out;
}

BaselineFit gee_fit(const PanelDataset& data, WorkingCorrelation working, const GeeOptions& options) {
  const auto n = data.n_subjects();
  const auto m = static_cast<Eigen::Index>(data.response_dim());
  if (n <= data.n_covariates()) throw FitError("GEE needs N > p");

  const MatrixXd eye = MatrixXd::Identity(m, m);
  auto fit = weighted_least_squares(data, eye);
  BaselineFit out;
  out.iterations = 1;

  if (working == WorkingCorrelation::Independence) {
    out.method = BaselineMethod::GeeIndependence;
    out.beta_hat = fit.beta;
    out.covariance = sandwich(data, eye, fit);
    out.converged = true;
    return out;
  }

  out.method = BaselineMethod::GeeExchangeable;
  const double rho_lo = -1.0 / static_cast<double>(m - 1);
  const double margin = 1e-6;
  MatrixXd w = eye;
  double s2 = 1.0;
  double rho = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    double sum_sq = 0.0;
    double sum_cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const VectorXd e =
          data.responses().row(static_cast<Eigen::Index>(i)).transpose() - data.subject_covariates(i) * fit.beta;
      const double total = e.sum();
      const double sq = e.squaredNorm();
      sum_sq += sq;
      sum_cross += 0.5 * (total * total - sq);
    }
    const double n_obs = static_cast<double>(n) * static_cast<double>(m);
    const double n_pairs = static_cast<double>(n) * static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
    s2 = sum_sq / n_obs;
    rho = (sum_cross / n_pairs) / s2;
    if (rho <= rho_lo + margin || rho >= 1.0 - margin) {
      rho = std::clamp(rho, rho_lo + margin, 1.0 - margin);
      out.rho_clamped = true;
    }
    w = exchangeable_inverse(s2, rho, m);
    auto next = weighted_least_squares(data, w);
    const double change = (next.beta - fit.beta).cwiseAbs().maxCoeff();
    fit = std::move(next);
    out.iterations = it;
    if (change <= options.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.beta_hat = fit.beta;
  out.covariance = sandwich(data, w, fit);
  out.sigma2_hat = s2;
  out.rho_hat = rho;
  return out;
}

}  // namespace dimm
