#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <stdexcept>
#include <utility>

namespace tpg {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Role { primal, dual };

// Coordinate array tagged with the side of the pairing it lives on.
template <Role R>
class Coords {
 public:
  Coords() = default;
  explicit Coords(Eigen::Index n) : c_(Eigen::VectorXd::Zero(n)) {}
  explicit Coords(Eigen::VectorXd c) : c_(std::move(c)) {}
  Coords(std::initializer_list<double> xs) : c_(static_cast<Eigen::Index>(xs.size())) {
    Eigen::Index i = 0;
    for (double x : xs) c_[i++] = x;
  }

  static Coords zero(Eigen::Index n) { return Coords(n); }

  Eigen::Index size() const { return c_.size(); }
  double operator[](Eigen::Index i) const { return c_[i]; }
  double& operator[](Eigen::Index i) { return c_[i]; }
  const Eigen::VectorXd& coords() const { return c_; }
  Eigen::VectorXd& coords() { return c_; }
  bool all_finite() const { return c_.allFinite(); }

  Coords& operator+=(const Coords& o) {
    check_same(o);
    c_ += o.c_;
    return *this;
  }
  Coords& operator-=(const Coords& o) {
    check_same(o);
    c_ -= o.c_;
    return *this;
  }
  Coords& operator*=(double a) {
    c_ *= a;
    return *this;
  }

  friend Coords operator+(Coords a, const Coords& b) { return a += b; }
  friend Coords operator-(Coords a, const Coords& b) { return a -= b; }
  friend Coords operator*(double a, Coords x) { return x *= a; }
  friend Coords operator-(Coords x) { return x *= -1.0; }
  friend bool operator==(const Coords& a, const Coords& b) {
    return a.size() == b.size() && (a.c_.array() == b.c_.array()).all();
  }

 private:
  void check_same(const Coords& o) const {
    if (o.size() != size()) throw DimensionError("coordinate arrays differ in length");
  }

  Eigen::VectorXd c_;
};

using Vec = Coords<Role::primal>;
using DualVec = Coords<Role::dual>;

// R^dim with the l^r norm; dual objects are measured with r* = r/(r-1).
class SpaceModel {
 public:
  SpaceModel(Eigen::Index dim, double r);

  Eigen::Index dim() const { return dim_; }
  double r() const { return r_; }
  double dual_r() const { return r_ / (r_ - 1.0); }

 private:
  Eigen::Index dim_;
  double r_;
};

double lr_norm(const Eigen::VectorXd& x, double r);

double norm(const SpaceModel& space, const Vec& x);
double norm(const SpaceModel& space, const DualVec& x);

DualVec duality_map(const SpaceModel& space, double s, const Vec& x);

double pairing(const DualVec& gamma, const Vec& x);

}  // namespace tpg
