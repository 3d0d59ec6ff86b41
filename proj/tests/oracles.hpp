#pragma once

#include <cmath>
#include <functional>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-13);
}

// Sphere ground state and its derivative.
inline double q_sphere(double r) { return 2.0 * std::atan(r); }
inline double dq_sphere(double r) { return 2.0 / (1.0 + r * r); }

// Bisection on a bracketed sign change.
inline double bisect(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a);
  for (int k = 0; k < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++k) {
    const double c = 0.5 * (a + b);
    const double fc = f(c);
    if ((fc < 0.0) == (fa < 0.0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace oracle
