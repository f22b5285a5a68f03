#pragma once

// Unconstrained quasi-Newton minimization for small, smooth problems.

#include <functional>
#include <vector>

namespace titrate::optim {

using Vector = std::vector<double>;

/// Returns f(x) and writes the gradient into `grad` (same size as x).
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct BfgsOptions {
  double grad_tol = 1e-6;   // stop when max |g_i| falls below this
  double rel_f_tol = 1e-14; // or when an accepted step improves f by less than this, relatively
  int max_iters = 200;
  double max_step = 1.0;    // cap on the Euclidean length of a trial step
  double armijo = 1e-4;
};

struct BfgsResult {
  Vector x;
  double f = 0.0;
  Vector grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  /// Objective after each accepted step, starting with the initial value.
  std::vector<double> trace;
};

/// BFGS with backtracking (Armijo) line search. Steps that do not decrease f are
/// never accepted, so `trace` is non-increasing.
BfgsResult minimize_bfgs(const Objective& f, Vector x0, const BfgsOptions& opts = {});

}  // namespace titrate::optim
