#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

namespace mtq::quad {

/// Adaptive Gauss-Kronrod (15 points) on a finite interval.
template <typename F>
double adaptive(F&& f, double a, double b, double rel_tol = 1e-13, unsigned max_depth = 15) {
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol);
}

/// Fixed 10-point Gauss-Legendre rule; exact for polynomials of degree <= 19.
template <typename F>
double gauss10(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

}  // namespace mtq::quad
