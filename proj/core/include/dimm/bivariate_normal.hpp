#pragma once

#include "dimm/covariance.hpp"

#include <Eigen/Dense>

namespace dimm {

/// Log density of a bivariate normal with covariance `omega` at `y`.
double bivariate_normal_logpdf(const Eigen::Vector2d& y, const Eigen::Vector2d& mu, const PairCovariance& omega);

}  // namespace dimm
