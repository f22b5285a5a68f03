#include <gtest/gtest.h>

#include <cmath>

#include "titrate/errors.hpp"
#include "titrate/jet.hpp"
#include "titrate/optimize.hpp"

using namespace titrate;

TEST(Jet, DerivativesOfClosedForm) {
  // f(x, y) = exp(x y) * log(x + y^2) at (0.7, 1.3); derivatives by symbolic algebra.
  const double x0 = 0.7, y0 = 1.3;
  using J = Jet<3>;
  const J x = J::variable(x0, 0), y = J::variable(y0, 1);
  const J f = exp(x * y) * log(x + y * y);

  const double e = std::exp(x0 * y0), s = x0 + y0 * y0, l = std::log(s);
  EXPECT_NEAR(f.value(), e * l, 1e-13);
  EXPECT_NEAR(f.deriv(1, 0), e * (y0 * l + 1.0 / s), 1e-12);
  EXPECT_NEAR(f.deriv(0, 1), e * (x0 * l + 2.0 * y0 / s), 1e-12);
  const double fxx = e * (y0 * y0 * l + 2.0 * y0 / s - 1.0 / (s * s));
  EXPECT_NEAR(f.deriv(2, 0), fxx, 1e-11);
  const double fxy = e * ((1.0 + x0 * y0) * l + x0 / s + 2.0 * y0 * y0 / s - 2.0 * y0 / (s * s));
  EXPECT_NEAR(f.deriv(1, 1), fxy, 1e-11);
}

TEST(Jet, ThirdDerivativesMatchFiniteDifferences) {
  using J = Jet<3>;
  auto g = [](double a, double b) { return std::exp(-a * b) / (a * a) + std::log(a) * b * b * b; };
  const double a0 = 1.2, b0 = 0.4, h = 1e-3;
  const J a = J::variable(a0, 0), b = J::variable(b0, 1);
  const J inv_a = exp(-2.0 * log(a));
  const J f = exp(-(a * b)) * inv_a + log(a) * b * b * b;
  EXPECT_NEAR(f.value(), g(a0, b0), 1e-13);
  // d3/da2db by central differences of second differences
  auto gxx = [&](double bb) { return (g(a0 + h, bb) - 2 * g(a0, bb) + g(a0 - h, bb)) / (h * h); };
  const double fd = (gxx(b0 + h) - gxx(b0 - h)) / (2 * h);
  EXPECT_NEAR(f.deriv(2, 1), fd, 1e-4 * std::abs(fd) + 1e-5);
}

TEST(Bfgs, Rosenbrock) {
  optim::Objective f = [](const optim::Vector& x, optim::Vector& g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  optim::BfgsOptions o;
  o.grad_tol = 1e-8;
  o.max_iters = 500;
  const auto r = optim::minimize_bfgs(f, {-1.2, 1.0}, o);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
}

TEST(Bfgs, QuadraticIsExact) {
  optim::Objective f = [](const optim::Vector& x, optim::Vector& g) {
    g = {2.0 * (x[0] - 3.0), 8.0 * (x[1] + 1.0), 2.0 * x[2]};
    return (x[0] - 3) * (x[0] - 3) + 4 * (x[1] + 1) * (x[1] + 1) + x[2] * x[2];
  };
  const auto r = optim::minimize_bfgs(f, {0.0, 0.0, 5.0});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 3.0, 1e-6);
  EXPECT_NEAR(r.x[1], -1.0, 1e-6);
  EXPECT_NEAR(r.x[2], 0.0, 1e-6);
}

TEST(Bfgs, RejectsNonFiniteStart) {
  optim::Objective f = [](const optim::Vector& x, optim::Vector& g) {
    g = {1.0};
    return std::log(x[0]);
  };
  EXPECT_THROW(optim::minimize_bfgs(f, {-1.0}), InvalidArgument);
}
