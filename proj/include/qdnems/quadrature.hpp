#pragma once

#include <vector>

namespace qdnems::quadrature {

/// Gauss-Legendre rule on [lo, hi]. Exact for polynomials of degree 2n-1.
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

Rule gauss_legendre(int n, double lo = -1.0, double hi = 1.0);

}  // namespace qdnems::quadrature
