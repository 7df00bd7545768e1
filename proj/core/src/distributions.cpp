#include "dimm/distributions.hpp"

#include "dimm/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace dimm {

namespace {

constexpr int kMaxTerms = 100000;
constexpr double kEps = 1e-17;

// Lower series: P(a, x) = e^-x x^a / Gamma(a + 1) * sum_n x^n / ((a+1)...(a+n)).
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper continued fraction for Q(a, x), modified Lentz.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_chi2_args(double x, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) {
    std::ostringstream os;
    os << "chi-squared degrees of freedom must be positive, got " << df;
    throw DomainError(os.str());
  }
  if (!(x >= 0.0)) {
    std::ostringstream os;
    os << "chi-squared argument must be non-negative, got " << x;
    throw DomainError(os.str());
  }
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw DomainError("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double chi2_cdf(double x, double df) {
  check_chi2_args(x, df);
  return regularized_gamma_p(0.5 * df, 0.5 * x);
}

double chi2_sf(double x, double df) {
  check_chi2_args(x, df);
  const double a = 0.5 * df;
  const double h = 0.5 * x;
  if (h == 0.0) return 1.0;
  if (std::isinf(h)) return 0.0;
  if (h < a + 1.0) return 1.0 - gamma_p_series(a, h);
  return gamma_q_fraction(a, h);
}

double chi2_quantile(double prob, double df) {
  if (!(prob >= 0.0 && prob < 1.0)) throw DomainError("chi2_quantile: probability must lie in [0, 1)");
  check_chi2_args(0.0, df);
  if (prob == 0.0) return 0.0;
  double lo = 0.0;
  double hi = std::max(1.0, df);
  while (chi2_cdf(hi, df) < prob) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, df) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double normal_cdf(double z) {
  if (std::isnan(z)) throw DomainError("normal_cdf: argument is NaN");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double normal_two_sided_p(double z) {
  if (std::isnan(z)) throw DomainError("normal_two_sided_p: argument is NaN");
  return std::erfc(std::abs(z) / std::numbers::sqrt2);
}

}  // namespace dimm
