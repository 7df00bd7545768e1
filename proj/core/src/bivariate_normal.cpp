#include "dimm/bivariate_normal.hpp"

#include <cmath>
#include <numbers>

namespace dimm {

double bivariate_normal_logpdf(const Eigen::Vector2d& y, const Eigen::Vector2d& mu, const PairCovariance& omega) {
  const double s2 = omega.sigma() * omega.sigma();
  const double c = omega.correlation();
  const double one_minus_c2 = 1.0 - c * c;
  const double e1 = y(0) - mu(0);
  const double e2 = y(1) - mu(1);
  const double quad = (e1 * e1 + e2 * e2 - 2.0 * c * e1 * e2) / (s2 * one_minus_c2);
  return -std::log(2.0 * std::numbers::pi) - 0.5 * omega.log_determinant() - 0.5 * quad;
}

}  // namespace dimm
