#pragma once

// Truncated bivariate Taylor polynomials ("jets").
//
// Jet<N> holds the Taylor coefficients c_ij (i + j <= N) of a smooth function
// around a point, in two variables x and y. Arithmetic and exp/log propagate the
// coefficients exactly, so evaluating a closed-form model on jets yields its
// value, gradient, Hessian and (for N = 3) third derivatives without finite
// differences.

#include <array>
#include <cmath>

namespace titrate {

template <int N>
class Jet {
  static_assert(N >= 1 && N <= 4);

 public:
  static constexpr int kSize = (N + 1) * (N + 2) / 2;

  static constexpr int index(int i, int j) { return (i + j) * (i + j + 1) / 2 + j; }

  Jet() = default;
  explicit Jet(double v) { c_[0] = v; }

  /// The coordinate function x (var == 0) or y (var == 1) around `at`.
  static Jet variable(double at, int var) {
    Jet j(at);
    j.c_[var == 0 ? index(1, 0) : index(0, 1)] = 1.0;
    return j;
  }

  double value() const { return c_[0]; }
  double coef(int i, int j) const { return c_[index(i, j)]; }
  double& coef(int i, int j) { return c_[index(i, j)]; }

  /// Partial derivative d^(i+j) / dx^i dy^j at the expansion point.
  double deriv(int i, int j) const { return coef(i, j) * factorial(i) * factorial(j); }

  Jet& operator+=(const Jet& o) {
    for (int k = 0; k < kSize; ++k) c_[k] += o.c_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int k = 0; k < kSize; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a += -s; }
  friend Jet operator-(Jet a) { return a *= -1.0; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int d1 = 0; d1 <= N; ++d1) {
      for (int j1 = 0; j1 <= d1; ++j1) {
        const double av = a.c_[index(d1 - j1, j1)];
        if (av == 0.0) continue;
        for (int d2 = 0; d1 + d2 <= N; ++d2) {
          for (int j2 = 0; j2 <= d2; ++j2) {
            r.c_[index(d1 - j1 + d2 - j2, j1 + j2)] += av * b.c_[index(d2 - j2, j2)];
          }
        }
      }
    }
    return r;
  }

  friend Jet exp(const Jet& a) {
    // exp(c0 + p) = e^c0 * sum_m p^m / m!, p nilpotent of order N + 1.
    Jet p = a;
    p.c_[0] = 0.0;
    Jet sum(1.0);
    Jet term(1.0);
    for (int m = 1; m <= N; ++m) {
      term = term * p;
      term *= 1.0 / m;
      sum += term;
    }
    return sum * std::exp(a.c_[0]);
  }

  friend Jet log(const Jet& a) {
    // log(c0 (1 + q)) = log c0 + sum_m (-1)^(m+1) q^m / m.
    Jet q = a;
    q.c_[0] = 0.0;
    q *= 1.0 / a.c_[0];
    Jet sum(std::log(a.c_[0]));
    Jet power(1.0);
    for (int m = 1; m <= N; ++m) {
      power = power * q;
      sum += power * ((m % 2 == 1 ? 1.0 : -1.0) / m);
    }
    return sum;
  }

 private:
  static constexpr double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

  std::array<double, kSize> c_{};
};

}  // namespace titrate
