#include "tpg/geometry.hpp"

#include <cmath>
#include <string>

namespace tpg {

SpaceModel::SpaceModel(Eigen::Index dim, double r) : dim_(dim), r_(r) {
  if (dim < 1) throw DimensionError("space dimension must be at least 1");
  if (!(r > 1.0) || !std::isfinite(r)) throw std::invalid_argument("norm exponent must satisfy r > 1");
}

namespace {

void check_dim(const SpaceModel& space, Eigen::Index n) {
  if (n != space.dim())
    throw DimensionError("expected dimension " + std::to_string(space.dim()) + ", got " +
                         std::to_string(n));
}

}  // namespace

double lr_norm(const Eigen::VectorXd& x, double r) {
  const double m = x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
  if (m == 0.0 || !std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i]) / m, r);
  return m * std::pow(acc, 1.0 / r);
}

double norm(const SpaceModel& space, const Vec& x) {
  check_dim(space, x.size());
  return lr_norm(x.coords(), space.r());
}

double norm(const SpaceModel& space, const DualVec& x) {
  check_dim(space, x.size());
  return lr_norm(x.coords(), space.dual_r());
}

DualVec duality_map(const SpaceModel& space, double s, const Vec& x) {
  check_dim(space, x.size());
  if (!(s > 1.0)) throw std::invalid_argument("duality map gauge exponent must satisfy s > 1");
  if (!x.all_finite()) throw NumericError("duality map applied to a non-finite vector");
  const double r = space.r();
  const double nx = lr_norm(x.coords(), r);
  DualVec y(x.size());
  if (nx == 0.0) return y;
  const double scale = std::pow(nx, s - 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i]);
    if (a != 0.0) y[i] = std::copysign(scale * std::pow(a / nx, r - 1.0), x[i]);
  }
  return y;
}

double pairing(const DualVec& gamma, const Vec& x) {
  if (gamma.size() != x.size()) throw DimensionError("pairing of vectors with different lengths");
  return gamma.coords().dot(x.coords());
}

}  // namespace tpg
