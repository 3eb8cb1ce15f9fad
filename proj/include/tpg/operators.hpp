#pragma once

#include "tpg/geometry.hpp"
#include "tpg/penalty.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>

namespace tpg {

// Forward map F together with its derivative family L(u) = F'(u).
class Operator {
 public:
  virtual ~Operator() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index domain_dim() const = 0;
  virtual Eigen::Index range_dim() const = 0;
  virtual bool is_linear() const { return false; }

  virtual Eigen::VectorXd apply(const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd deriv_apply(const Eigen::VectorXd& u, const Eigen::VectorXd& h) const = 0;
  virtual Eigen::VectorXd deriv_adjoint(const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& xi) const = 0;

  // F(ut) - F(u)
  virtual Eigen::VectorXd difference(const Eigen::VectorXd& u, const Eigen::VectorXd& ut) const;
  // F(ut) - F(u) - L(u)(ut - u)
  virtual Eigen::VectorXd linearization_error(const Eigen::VectorXd& u,
                                              const Eigen::VectorXd& ut) const;
  // Dense L(u), one column per deriv_apply.
  virtual Eigen::MatrixXd derivative(const Eigen::VectorXd& u) const;
};

class LinearDeconv : public Operator {
 public:
  explicit LinearDeconv(Eigen::MatrixXd a);

  std::string name() const override { return "deconv"; }
  Eigen::Index domain_dim() const override { return a_.cols(); }
  Eigen::Index range_dim() const override { return a_.rows(); }
  bool is_linear() const override { return true; }
  const Eigen::MatrixXd& matrix() const { return a_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd deriv_apply(const Eigen::VectorXd& u, const Eigen::VectorXd& h) const override;
  Eigen::VectorXd deriv_adjoint(const Eigen::VectorXd& u, const Eigen::VectorXd& xi) const override;
  Eigen::VectorXd linearization_error(const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& ut) const override;
  Eigen::MatrixXd derivative(const Eigen::VectorXd& u) const override;

 private:
  Eigen::MatrixXd a_;
};

// F(u)_i = sigma_i (exp(u_i) - 1)
class DiagonalExp : public Operator {
 public:
  explicit DiagonalExp(Eigen::VectorXd sigma);

  std::string name() const override { return "diagexp"; }
  Eigen::Index domain_dim() const override { return sigma_.size(); }
  Eigen::Index range_dim() const override { return sigma_.size(); }
  const Eigen::VectorXd& sigma() const { return sigma_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd deriv_apply(const Eigen::VectorXd& u, const Eigen::VectorXd& h) const override;
  Eigen::VectorXd deriv_adjoint(const Eigen::VectorXd& u, const Eigen::VectorXd& xi) const override;
  Eigen::VectorXd difference(const Eigen::VectorXd& u, const Eigen::VectorXd& ut) const override;
  Eigen::VectorXd linearization_error(const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& ut) const override;
  Eigen::MatrixXd derivative(const Eigen::VectorXd& u) const override;

 private:
  Eigen::VectorXd sigma_;
};

struct ForwardProblem {
  std::shared_ptr<const Operator> op;
  SpaceModel domain{1, 2.0};
  SpaceModel data{1, 2.0};
  Vec u0;
  DualVec gamma0;
  double eps = std::numeric_limits<double>::infinity();
  double eta = 0.0;
  double c_stab = 0.0;
  double deriv_bound = 0.0;  // C0
  std::optional<Vec> truth;
};

Vec apply(const ForwardProblem& fp, const Vec& u);
Vec deriv_apply(const ForwardProblem& fp, const Vec& u, const Vec& h);
DualVec deriv_adjoint(const ForwardProblem& fp, const Vec& u, const DualVec& xi);

// Uniform-radius sample of B(center, radius) in the l^r norm of `space`.
template <class Rng>
Vec sample_ball(const SpaceModel& space, const Vec& center, double radius, Rng& rng);

double estimate_eta(const ForwardProblem& fp, std::size_t samples, std::uint64_t seed = 1);
double estimate_stability(const ForwardProblem& fp, const Penalty& pen, std::size_t samples,
                          std::uint64_t seed = 2);
double estimate_derivative_bound(const ForwardProblem& fp, std::size_t samples,
                                 std::uint64_t seed = 3);

// ||A||_{l^p -> l^q}; exact for p = q = 2, otherwise a power-iteration lower estimate.
double operator_norm(const Eigen::MatrixXd& a, double p, double q);

ForwardProblem make_deconv(Eigen::Index n, double kernel_width, double amplitude = 10.0);
ForwardProblem make_diagexp(Eigen::Index n, double sigma_max, double decay, double amplitude);
ForwardProblem make_problem(std::shared_ptr<const Operator> op, std::optional<Vec> truth);

struct CalibrationOptions {
  std::size_t samples = 2000;
  std::size_t derivative_samples = 50;
  std::uint64_t seed = 1;
  std::optional<double> eps;
  std::optional<double> eta;
  std::optional<double> c_stab;
  std::optional<double> deriv_bound;
  double data_r = 2.0;
};

// Binds the domain to the penalty's space, sets gamma0 = subgradient(u0) and fills eps, eta, C and
// C0. Without an explicit eps the radius is 1.1 (D(u_dagger, u0)/c0)^{1/p}.
ForwardProblem calibrate(ForwardProblem fp, const Penalty& pen, const CalibrationOptions& opts);

}  // namespace tpg

#include "tpg/detail/sample_ball.hpp"
