#pragma once

#include <cmath>

namespace collapse {

/// Bernoulli function B(x) = x/(eˣ − 1), B(0) = 1. B(−x) = B(x) + x.
inline double bernoulli(double x) {
  if (x == 0) return 1.0;
  return x / std::expm1(x);
}

/// Exponentially fitted flux from cell i to cell j across one face for
/// u_t = ∇·(∇u − u∇v), per unit face length: (1/d)[B(−δ)uᵢ − B(δ)uⱼ], δ = vⱼ − vᵢ.
/// Vanishes exactly when uⱼ/uᵢ = e^δ.
inline double sg_flux(double ui, double uj, double vi, double vj, double distance) {
  const double delta = vj - vi;
  return (bernoulli(-delta) * ui - bernoulli(delta) * uj) / distance;
}

}  // namespace collapse
