#include "dimm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace dimm::optim {

namespace {

double safe_eval(const Objective& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const NelderMeadOptions& opts) {
  const auto n = x0.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  NelderMeadResult res;

  const double step = opts.initial_step * std::max(1.0, x0.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < n; ++k) pts[static_cast<std::size_t>(k + 1)](k) += step;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    vals[k] = safe_eval(f, pts[k]);
    ++res.evaluations;
  }

  std::vector<std::size_t> order(pts.size());
  for (int it = 0; it < opts.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second_worst = order[order.size() - 2];

    const double spread = vals[worst] - vals[best];
    if (std::isfinite(spread) &&
        spread <= opts.relative_tolerance * (std::abs(vals[best]) + opts.relative_tolerance)) {
      res.converged = true;
      break;
    }
    res.iterations = it + 1;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k != worst) centroid += pts[k];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - pts[worst]);
    const double f_ref = safe_eval(f, reflected);
    ++res.evaluations;

    if (f_ref < vals[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double f_exp = safe_eval(f, expanded);
      ++res.evaluations;
      if (f_exp < f_ref) {
        pts[worst] = expanded;
        vals[worst] = f_exp;
      } else {
        pts[worst] = reflected;
        vals[worst] = f_ref;
      }
      continue;
    }
    if (f_ref < vals[second_worst]) {
      pts[worst] = reflected;
      vals[worst] = f_ref;
      continue;
    }

    const bool outside = f_ref < vals[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double f_con = safe_eval(f, contracted);
    ++res.evaluations;
    if (f_con < std::min(f_ref, vals[worst])) {
      pts[worst] = contracted;
      vals[worst] = f_con;
      continue;
    }

    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
      vals[k] = safe_eval(f, pts[k]);
      ++res.evaluations;
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

BfgsResult bfgs(const Objective& f, const Gradient& grad, const Eigen::VectorXd& x0, const BfgsOptions& opts) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 60;
  const double eps = std::numeric_limits<double>::epsilon();
  const auto n = x0.size();

  BfgsResult res;
  res.x = x0;
  res.value = f(res.x);
  res.gradient = grad(res.x);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.gradient_norm = res.gradient.cwiseAbs().maxCoeff();
    if (res.gradient_norm <= opts.gradient_tolerance) {
      res.converged = true;
      return res;
    }
    res.iterations = it + 1;

    Eigen::VectorXd dir = -h_inv * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      dir = -res.gradient;
      slope = res.gradient.dot(dir);
    }

    const double slack = 16.0 * eps * (1.0 + std::abs(res.value));
    double alpha = 1.0;
    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int k = 0; k < kMaxHalvings; ++k) {
      x_new = res.x + alpha * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.value + kArmijo * alpha * slope + slack) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (h_inv.isIdentity()) break;
      h_inv.setIdentity();
      continue;
    }

    Eigen::VectorXd g_new = grad(x_new);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.gradient;
    res.x = std::move(x_new);
    res.value = f_new;
    res.gradient = std::move(g_new);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      h_inv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  res.gradient_norm = res.gradient.cwiseAbs().maxCoeff();
  res.converged = res.gradient_norm <= opts.gradient_tolerance;
  return res;
}

}  // namespace dimm::optim
