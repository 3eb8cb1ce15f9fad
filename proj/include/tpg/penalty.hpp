#pragma once

#include "tpg/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace tpg {

enum class PenaltyKind { power_norm, quadratic_l1 };

std::string to_string(PenaltyKind kind);

class Penalty {
 public:
  // (1/p)||u||_p^p on l^p. Without an explicit c0 the default 2^{1-p}/p is used; either way the
  // constant is checked on sampled pairs and shrunk by 0.9 until no pair violates p-convexity.
  static Penalty power_norm(Eigen::Index dim, double p, std::optional<double> c0 = std::nullopt,
                            std::uint64_t seed = 20240521);
  // (1/2)||u||_2^2 + beta ||u||_1, p = 2, c0 = 1/2.
  static Penalty quadratic_l1(Eigen::Index dim, double beta);

  PenaltyKind kind() const { return kind_; }
  double p() const { return p_; }
  double p_conj() const { return p_ / (p_ - 1.0); }
  double c0() const { return c0_; }
  double beta() const { return beta_; }
  const SpaceModel& space() const { return space_; }
  Eigen::Index dim() const { return space_.dim(); }

 private:
  Penalty(PenaltyKind kind, double p, double c0, double beta, SpaceModel space)
      : kind_(kind), p_(p), c0_(c0), beta_(beta), space_(space) {}

  PenaltyKind kind_;
  double p_;
  double c0_;
  double beta_;
  SpaceModel space_;
};

struct BregmanRecord {
  double value = 0.0;
  bool suspect = false;  // value < -1e-12: gamma is not a subgradient at u
  Vec utilde;
  Vec u;
  DualVec gamma;
};

double phi(const Penalty& pen, const Vec& u);
DualVec subgradient(const Penalty& pen, const Vec& u);
Vec conjugate_grad(const Penalty& pen, const DualVec& xi);

// phi*(xi) evaluated through the maximiser conjugate_grad(xi).
double conjugate_value(const Penalty& pen, const DualVec& xi);

BregmanRecord bregman(const Penalty& pen, const Vec& utilde, const Vec& u, const DualVec& gamma);
double bregman_distance(const Penalty& pen, const Vec& utilde, const Vec& u, const DualVec& gamma);

double check_three_point(const Penalty& pen, const Vec& u, const Vec& u1, const Vec& u2,
                         const DualVec& gamma1, const DualVec& gamma2);

// Number of sampled pairs on which D(ut,u) < c0 ||u-ut||_p^p.
std::size_t convexity_violations(const Penalty& pen, double c0, std::size_t pairs,
                                 std::uint64_t seed);

}  // namespace tpg
