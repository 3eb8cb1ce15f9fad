#pragma once

#include "tpg/penalty.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

// Minimiser of w -> phi(w) - <xi, w> without the closed-form conjugate gradient. Both penalty
// families are sums over coordinates, so each coordinate is searched on a one-dimensional copy of
// the penalty: a coarse grid, then golden section inside the best grid cell.
inline tpg::Vec brute_force_argmin(const tpg::Penalty& pen, const tpg::DualVec& xi) {
  const tpg::Penalty one = pen.kind() == tpg::PenaltyKind::power_norm
                               ? tpg::Penalty::power_norm(1, pen.p(), pen.c0())
                               : tpg::Penalty::quadratic_l1(1, pen.beta());
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  tpg::Vec w(xi.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    auto f = [&](double x) { return tpg::phi(one, tpg::Vec{x}) - xi[i] * x; };
    const double half = 1.0 + std::abs(xi[i]);
    const int cells = 400;
    double best = 0.0;
    double fbest = f(0.0);
    for (int j = -cells; j <= cells; ++j) {
      const double x = half * j / cells;
      if (f(x) < fbest) {
        fbest = f(x);
        best = x;
      }
    }
    double a = best - half / cells;
    double b = best + half / cells;
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
      const double c = b - g * (b - a);
      const double d = a + g * (b - a);
      if (f(c) < f(d))
        b = d;
      else
        a = c;
    }
    const double mid = 0.5 * (a + b);
    w[i] = f(mid) <= fbest ? mid : best;
  }
  return w;
}

}  // namespace oracle
