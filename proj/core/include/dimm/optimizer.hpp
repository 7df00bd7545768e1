#pragma once

#include <Eigen/Dense>

#include <functional>

namespace dimm::optim {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct NelderMeadOptions {
  int max_iterations = 500;
  // Stop once (f_worst - f_best) <= relative_tolerance * (|f_best| + relative_tolerance).
  double relative_tolerance = 1e-10;
  // Simplex edge = initial_step * max(1, max|x0|), as in R's optim.
  double initial_step = 0.1;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free downhill simplex (reflection 1, expansion 2, contraction
/// 0.5, shrink 0.5). Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const NelderMeadOptions& opts = {});

struct BfgsOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;  // sup-norm
};

struct BfgsResult {
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;
  double value = 0.0;
  double gradient_norm = 0.0;  // sup-norm at x
  int iterations = 0;
  bool converged = false;
};

/// Quasi-Newton minimisation with an inverse-Hessian BFGS update and
/// backtracking Armijo line search. The sufficient-decrease test tolerates
/// round-off of order 16 eps (1 + |f|) so the iteration keeps following the
/// gradient once objective differences fall below double resolution.
BfgsResult bfgs(const Objective& f, const Gradient& grad, const Eigen::VectorXd& x0, const BfgsOptions& opts = {});

}  // namespace dimm::optim
