#pragma once

// Independent numerical oracles shared by the unit and acceptance suites:
// adaptive quadrature and finite differences. Nothing here calls into the
// library under test.

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>

namespace firecast::testing {

/// Adaptive Gauss-Kronrod on a finite interval.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 8, tol, &err);
}

/// Integral over (a, inf) by splitting into a finite head and a double-exponential tail.
inline double integrate_to_inf(const std::function<double(double)>& f, double a,
                               double split) {
  boost::math::quadrature::exp_sinh<double> tail;
  return integrate(f, a, split) + tail.integrate(f, split, std::numeric_limits<double>::infinity());
}

/// Integral over (0, inf) of f(y) via y = exp(s); robust to y^(k-1) endpoint behaviour.
inline double integrate_log_scale(const std::function<double(double)>& f, double s_lo = -60.0,
                                  double s_hi = 12.0) {
  auto g = [&](double s) {
    const double y = std::exp(s);
    return f(y) * y;
  };
  double total = 0.0;
  const int pieces = 48;
  const double h = (s_hi - s_lo) / pieces;
  for (int i = 0; i < pieces; ++i) total += integrate(g, s_lo + i * h, s_lo + (i + 1) * h);
  return total;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Relative error with a floor on the denominator so that near-zero
/// derivatives are judged on an absolute scale of `floor`.
inline double rel_err(double got, double want, double floor = 1e-4) {
  return std::abs(got - want) / std::max({std::abs(want), std::abs(got), floor});
}

}  // namespace firecast::testing
