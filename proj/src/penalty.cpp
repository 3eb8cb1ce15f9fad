#include "tpg/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace tpg {

std::string to_string(PenaltyKind kind) {
  return kind == PenaltyKind::power_norm ? "power-norm" : "quadratic-l1";
}

namespace {

void check_dim(const Penalty& pen, Eigen::Index n) {
  if (n != pen.dim()) throw DimensionError("penalty dimension mismatch");
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Penalty Penalty::power_norm(Eigen::Index dim, double p, std::optional<double> c0,
                            std::uint64_t seed) {
  if (!(p >= 2.0) || !std::isfinite(p)) throw std::invalid_argument("power-norm penalty needs p >= 2");
  double c = c0.value_or(std::pow(2.0, 1.0 - p) / p);
  if (!(c > 0.0)) throw std::invalid_argument("convexity constant must be positive");
  Penalty pen(PenaltyKind::power_norm, p, c, 0.0, SpaceModel(dim, p));
  while (convexity_violations(pen, c, 10000, seed) > 0) c *= 0.9;
  pen.c0_ = c;
  return pen;
}

Penalty Penalty::quadratic_l1(Eigen::Index dim, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("l1 weight must be >= 0");
  return Penalty(PenaltyKind::quadratic_l1, 2.0, 0.5, beta, SpaceModel(dim, 2.0));
}

double phi(const Penalty& pen, const Vec& u) {
  check_dim(pen, u.size());
  const auto& x = u.coords();
  if (pen.kind() == PenaltyKind::power_norm) return x.array().abs().pow(pen.p()).sum() / pen.p();
  return 0.5 * x.squaredNorm() + pen.beta() * x.lpNorm<1>();
}

DualVec subgradient(const Penalty& pen, const Vec& u) {
  check_dim(pen, u.size());
  DualVec g(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double x = u[i];
    if (pen.kind() == PenaltyKind::power_norm)
      g[i] = x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), pen.p() - 1.0), x);
    else
      g[i] = x + pen.beta() * sgn(x);
  }
  return g;
}

Vec conjugate_grad(const Penalty& pen, const DualVec& xi) {
  check_dim(pen, xi.size());
  if (!xi.all_finite()) throw NumericError("conjugate gradient of a non-finite dual vector");
  Vec u(xi.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    const double x = xi[i];
    if (pen.kind() == PenaltyKind::power_norm) {
      if (pen.p() == 2.0)
        u[i] = x;
      else if (x != 0.0)
        u[i] = std::copysign(std::pow(std::abs(x), 1.0 / (pen.p() - 1.0)), x);
    } else {
      u[i] = sgn(x) * std::max(std::abs(x) - pen.beta(), 0.0);
    }
  }
  return u;
}

double conjugate_value(const Penalty& pen, const DualVec& xi) {
  const Vec u = conjugate_grad(pen, xi);
  return pairing(xi, u) - phi(pen, u);
}

double bregman_distance(const Penalty& pen, const Vec& utilde, const Vec& u, const DualVec& gamma) {
  check_dim(pen, utilde.size());
  check_dim(pen, u.size());
  check_dim(pen, gamma.size());
  return phi(pen, utilde) - phi(pen, u) - pairing(gamma, utilde - u);
}

BregmanRecord bregman(const Penalty& pen, const Vec& utilde, const Vec& u, const DualVec& gamma) {
  BregmanRecord rec;
  rec.value = bregman_distance(pen, utilde, u, gamma);
  rec.suspect = rec.value < -1e-12;
  rec.utilde = utilde;
  rec.u = u;
  rec.gamma = gamma;
  return rec;
}

double check_three_point(const Penalty& pen, const Vec& u, const Vec& u1, const Vec& u2,
                         const DualVec& gamma1, const DualVec& gamma2) {
  const double d2 = bregman_distance(pen, u, u2, gamma2);
  const double d1 = bregman_distance(pen, u, u1, gamma1);
  const double d12 = bregman_distance(pen, u1, u2, gamma2);
  return std::abs(d2 - d1 - d12 - pairing(gamma2 - gamma1, u1 - u));
}

std::size_t convexity_violations(const Penalty& pen, double c0, std::size_t pairs,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(-3.0, 1.0);
  const Eigen::Index n = pen.dim();
  std::size_t bad = 0;
  Vec u(n), ut(n);
  for (std::size_t k = 0; k < pairs; ++k) {
    const double su = std::pow(10.0, unif(rng));
    const double sd = std::pow(10.0, unif(rng));
    for (Eigen::Index i = 0; i < n; ++i) u[i] = su * normal(rng);
    for (Eigen::Index i = 0; i < n; ++i) ut[i] = u[i] + sd * normal(rng);
    if (k % 4 == 3) ut = -1.0 * u;
    const double d = bregman_distance(pen, ut, u, subgradient(pen, u));
    const double bound = c0 * std::pow(lr_norm((u - ut).coords(), pen.p()), pen.p());
    if (d < bound - 1e-12 * std::max(1.0, std::abs(bound))) ++bad;
  }
  return bad;
}

}  // namespace tpg
