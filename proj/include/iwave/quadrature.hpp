#pragma once

#include <functional>
#include <vector>

namespace iwave {

struct QuadratureRule {
  std::vector<double> nodes, weights;
};

// n-point Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a = -1, double b = 1);

// Adaptive Gauss-Kronrod (7-15) integration of a complex-valued integrand.
// Subdivides until the Kronrod/Gauss gap is below tol on each piece.
template <class F>
auto integrate_adaptive(const F& f, double a, double b, double tol, int depth = 0) -> decltype(f(a));

}  // namespace iwave

#include "iwave/quadrature_impl.hpp"
