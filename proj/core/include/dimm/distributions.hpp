#pragma once

namespace dimm {

/// Regularized lower incomplete gamma P(a, x). Series for x < a + 1,
/// Lentz continued fraction otherwise.
double regularized_gamma_p(double a, double x);

/// P(X <= x) for X ~ chi-squared with `df` degrees of freedom.
double chi2_cdf(double x, double df);

/// Upper tail 1 - chi2_cdf, computed without cancellation.
double chi2_sf(double x, double df);

/// Quantile of the chi-squared distribution, by bracketing and bisection.
double chi2_quantile(double prob, double df);

double normal_cdf(double z);

/// Two-sided tail probability 2 (1 - Phi(|z|)).
double normal_two_sided_p(double z);

}  // namespace dimm
