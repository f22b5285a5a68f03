#include "titrate/optimize.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "titrate/errors.hpp"

namespace titrate::optim {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_eigen(const Vector& v) { return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); }

Vector to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

BfgsResult minimize_bfgs(const Objective& f, Vector x0, const BfgsOptions& opts) {
  const auto n = static_cast<Eigen::Index>(x0.size());
  if (n == 0) throw InvalidArgument("empty parameter vector");

  BfgsResult res;
  Vector g_std(x0.size());
  double fx = f(x0, g_std);
  ++res.evaluations;
  if (!std::isfinite(fx)) throw InvalidArgument("objective is not finite at the starting point");

  VectorXd x = to_eigen(x0);
  VectorXd g = to_eigen(g_std);
  MatrixXd h = MatrixXd::Identity(n, n);
  bool scaled = false;
  res.trace.push_back(fx);

  for (res.iterations = 0; res.iterations < opts.max_iters; ++res.iterations) {
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    VectorXd d = -h * g;
    if (g.dot(d) >= 0.0) {
      h = MatrixXd::Identity(n, n);
      d = -g;
    }
    if (d.norm() > opts.max_step) d *= opts.max_step / d.norm();

    const double slope = g.dot(d);
    double t = 1.0;
    double f_new = 0.0;
    VectorXd x_new;
    Vector g_new_std(x0.size());
    bool accepted = false;
    for (int k = 0; k < 30; ++k) {
      x_new = x + t * d;
      f_new = f(to_std(x_new), g_new_std);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= fx + opts.armijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    const VectorXd g_new = to_eigen(g_new_std);
    const VectorXd s = x_new - x;
    const VectorXd y = g_new - g;
    const double decrease = fx - f_new;
    x = x_new;
    g = g_new;
    fx = f_new;
    res.trace.push_back(fx);

    const double ys = y.dot(s);
    if (ys > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h = MatrixXd::Identity(n, n) * (ys / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / ys;
      const MatrixXd left = MatrixXd::Identity(n, n) - rho * s * y.transpose();
      h = left * h * left.transpose() + rho * s * s.transpose();
    }
    if (decrease <= opts.rel_f_tol * std::max(1.0, std::abs(fx))) {
      res.converged = g.lpNorm<Eigen::Infinity>() < std::sqrt(opts.grad_tol);
      ++res.iterations;
      break;
    }
  }

  res.x = to_std(x);
  res.f = fx;
  res.grad = to_std(g);
  if (!res.converged && g.lpNorm<Eigen::Infinity>() < opts.grad_tol) res.converged = true;
  return res;
}

}  // namespace titrate::optim
