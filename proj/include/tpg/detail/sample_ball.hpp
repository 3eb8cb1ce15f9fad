#pragma once

#include <cmath>
#include <random>

namespace tpg {

template <class Rng>
Vec sample_ball(const SpaceModel& space, const Vec& center, double radius, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const Eigen::Index n = space.dim();
  Eigen::VectorXd d(n);
  double nd = 0.0;
  while (nd == 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) d[i] = normal(rng);
    nd = lr_norm(d, space.r());
  }
  const double rho = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
  return center + Vec(d * (rho / nd));
}

}  // namespace tpg
