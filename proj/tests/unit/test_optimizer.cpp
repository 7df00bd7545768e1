#include "dimm/optimizer.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace dimm::optim;
using Eigen::VectorXd;

namespace {

double rosenbrock(const VectorXd& x) { return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2); }

VectorXd rosenbrock_grad(const VectorXd& x) {
  VectorXd g(2);
  g(0) = -400.0 * x(0) * (x(1) - x(0) * x(0)) - 2.0 * (1.0 - x(0));
  g(1) = 200.0 * (x(1) - x(0) * x(0));
  return g;
}

}  // namespace

TEST_CASE("Nelder-Mead approaches the Rosenbrock minimum") {
  NelderMeadOptions o;
  o.max_iterations = 2000;
  o.relative_tolerance = 1e-14;
  const auto r = nelder_mead(rosenbrock, (VectorXd(2) << -1.2, 1.0).finished(), o);
  CHECK(r.value < 1e-8);
  CHECK(std::abs(r.x(0) - 1.0) < 1e-3);
  CHECK(r.evaluations > r.iterations);
}

TEST_CASE("Nelder-Mead respects the iteration budget") {
  NelderMeadOptions o;
  o.max_iterations = 5;
  const auto r = nelder_mead(rosenbrock, (VectorXd(2) << -1.2, 1.0).finished(), o);
  CHECK(r.iterations <= 5);
  CHECK_FALSE(r.converged);
}

TEST_CASE("Nelder-Mead treats non-finite values as +inf") {
  int nan_calls = 0;
  auto f = [&](const VectorXd& x) {
    if (x(0) < 0) {
      ++nan_calls;
      return std::numeric_limits<double>::quiet_NaN();
    }
    return (x(0) - 0.02) * (x(0) - 0.02);
  };
  // The minimum sits next to the NaN region, so the first reflection lands in it.
  const auto r = nelder_mead(f, VectorXd::Constant(1, 0.05));
  CHECK(nan_calls > 0);
  CHECK(std::abs(r.x(0) - 0.02) < 1e-4);
}

TEST_CASE("BFGS solves Rosenbrock to the gradient tolerance") {
  const auto r = bfgs(rosenbrock, rosenbrock_grad, (VectorXd(2) << -1.2, 1.0).finished());
  CHECK(r.converged);
  CHECK(r.gradient_norm <= 1e-8);
  CHECK(std::abs(r.x(0) - 1.0) < 1e-8);
  CHECK(std::abs(r.x(1) - 1.0) < 1e-8);
}

TEST_CASE("BFGS on an ill-scaled quadratic") {
  const VectorXd d = (VectorXd(3) << 1.0, 1e3, 1e-2).finished();
  const VectorXd c = (VectorXd(3) << 1.0, -2.0, 3.0).finished();
  auto f = [&](const VectorXd& x) { return 0.5 * (d.array() * (x - c).array().square()).sum(); };
  auto g = [&](const VectorXd& x) -> VectorXd { return d.array() * (x - c).array(); };
  const auto r = bfgs(f, g, VectorXd::Zero(3));
  CHECK(r.converged);
  CHECK((r.x - c).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("BFGS reports non-convergence when out of iterations") {
  BfgsOptions o;
  o.max_iterations = 2;
  const auto r = bfgs(rosenbrock, rosenbrock_grad, (VectorXd(2) << -1.2, 1.0).finished(), o);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations <= 2);
}
