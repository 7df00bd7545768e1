#pragma once

#include "dimm/model.hpp"

#include <string>

namespace dimm {

enum class BaselineMethod { GlsOracle, GeeIndependence, GeeExchangeable };

std::string to_string(BaselineMethod m);

struct BaselineFit {
  BaselineMethod method = BaselineMethod::GlsOracle;
  VectorXd beta_hat;
  MatrixXd covariance;
  int iterations = 0;
  bool converged = false;
  // GEE-CS working parameters; zero for the other methods.
  double sigma2_hat = 0.0;
  double rho_hat = 0.0;
  bool rho_clamped = false;
};

/// Generalized least squares with the true M x M covariance. Model-based
/// covariance (sum X' Sigma^-1 X)^-1.
BaselineFit gls_oracle(const PanelDataset& data, const MatrixXd& sigma);

enum class WorkingCorrelation { Independence, Exchangeable };

struct GeeOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;  // on max |delta beta|
};

/// Gaussian identity-link GEE with a single dispersion and robust sandwich
/// covariance. Exchangeable fits alternate a weighted least-squares step with
/// moment updates of (sigma^2, rho).
BaselineFit gee_fit(const PanelDataset& data, WorkingCorrelation working, const GeeOptions& options = {});

}  // namespace dimm
