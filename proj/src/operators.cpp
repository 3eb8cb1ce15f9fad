#include "tpg/operators.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>

namespace tpg {

Eigen::VectorXd Operator::difference(const Eigen::VectorXd& u, const Eigen::VectorXd& ut) const {
  return apply(ut) - apply(u);
}

Eigen::VectorXd Operator::linearization_error(const Eigen::VectorXd& u,
                                              const Eigen::VectorXd& ut) const {
  return difference(u, ut) - deriv_apply(u, ut - u);
}

Eigen::MatrixXd Operator::derivative(const Eigen::VectorXd& u) const {
  Eigen::MatrixXd l(range_dim(), domain_dim());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(domain_dim());
  for (Eigen::Index j = 0; j < domain_dim(); ++j) {
    e[j] = 1.0;
    l.col(j) = deriv_apply(u, e);
    e[j] = 0.0;
  }
  return l;
}

LinearDeconv::LinearDeconv(Eigen::MatrixXd a) : a_(std::move(a)) {
  if (a_.size() == 0) throw DimensionError("empty operator matrix");
  if (!a_.allFinite()) throw NumericError("operator matrix has non-finite entries");
}

Eigen::VectorXd LinearDeconv::apply(const Eigen::VectorXd& u) const { return a_ * u; }

Eigen::VectorXd LinearDeconv::deriv_apply(const Eigen::VectorXd&, const Eigen::VectorXd& h) const {
  return a_ * h;
}

Eigen::VectorXd LinearDeconv::deriv_adjoint(const Eigen::VectorXd&,
                                            const Eigen::VectorXd& xi) const {
  return a_.transpose() * xi;
}

Eigen::VectorXd LinearDeconv::linearization_error(const Eigen::VectorXd&,
                                                  const Eigen::VectorXd&) const {
  return Eigen::VectorXd::Zero(a_.rows());
}

Eigen::MatrixXd LinearDeconv::derivative(const Eigen::VectorXd&) const { return a_; }

DiagonalExp::DiagonalExp(Eigen::VectorXd sigma) : sigma_(std::move(sigma)) {
  if (sigma_.size() == 0) throw DimensionError("empty scale vector");
  if (!(sigma_.array() > 0.0).all() || !sigma_.allFinite())
    throw std::invalid_argument("diagonal scales must be positive and finite");
}

Eigen::VectorXd DiagonalExp::apply(const Eigen::VectorXd& u) const {
  return sigma_.array() * u.array().unaryExpr([](double x) { return std::expm1(x); });
}

Eigen::VectorXd DiagonalExp::deriv_apply(const Eigen::VectorXd& u, const Eigen::VectorXd& h) const {
  return sigma_.array() * u.array().exp() * h.array();
}

Eigen::VectorXd DiagonalExp::deriv_adjoint(const Eigen::VectorXd& u,
                                           const Eigen::VectorXd& xi) const {
  return sigma_.array() * u.array().exp() * xi.array();
}

namespace {

// exp(d) - 1 - d without cancellation for small |d|
double expm1_minus_id(double d) {
  if (std::abs(d) > 1e-2) return std::expm1(d) - d;
  double term = d * d / 2.0;
  double acc = term;
  for (int k = 3; k < 12; ++k) {
    term *= d / k;
    acc += term;
  }
  return acc;
}

}  // namespace

Eigen::VectorXd DiagonalExp::difference(const Eigen::VectorXd& u, const Eigen::VectorXd& ut) const {
  Eigen::VectorXd out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    out[i] = sigma_[i] * std::exp(u[i]) * std::expm1(ut[i] - u[i]);
  return out;
}

Eigen::VectorXd DiagonalExp::linearization_error(const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& ut) const {
  Eigen::VectorXd out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    out[i] = sigma_[i] * std::exp(u[i]) * expm1_minus_id(ut[i] - u[i]);
  return out;
}

Eigen::MatrixXd DiagonalExp::derivative(const Eigen::VectorXd& u) const {
  return (sigma_.array() * u.array().exp()).matrix().asDiagonal();
}

namespace {

void check_domain(const ForwardProblem& fp, Eigen::Index n) {
  if (!fp.op) throw std::invalid_argument("forward problem without operator");
  if (n != fp.op->domain_dim()) throw DimensionError("vector does not match operator domain");
}

void check_ball(const ForwardProblem& fp, const Vec& u) {
  static std::atomic<bool> warned{false};
  if (!std::isfinite(fp.eps) || fp.u0.size() != u.size()) return;
  if (norm(fp.domain, u - fp.u0) <= 3.0 * fp.eps * (1.0 + 1e-9)) return;
  if (!warned.exchange(true))
    std::cerr << "warning: forward operator evaluated outside B(u0, 3 eps)\n";
}

Vec checked(Eigen::VectorXd v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + " produced a non-finite value");
  return Vec(std::move(v));
}

}  // namespace

Vec apply(const ForwardProblem& fp, const Vec& u) {
  check_domain(fp, u.size());
  check_ball(fp, u);
  return checked(fp.op->apply(u.coords()), "forward operator");
}

Vec deriv_apply(const ForwardProblem& fp, const Vec& u, const Vec& h) {
  check_domain(fp, u.size());
  check_domain(fp, h.size());
  return checked(fp.op->deriv_apply(u.coords(), h.coords()), "derivative");
}

DualVec deriv_adjoint(const ForwardProblem& fp, const Vec& u, const DualVec& xi) {
  check_domain(fp, u.size());
  if (xi.size() != fp.op->range_dim()) throw DimensionError("dual vector does not match range");
  Eigen::VectorXd g = fp.op->deriv_adjoint(u.coords(), xi.coords());
  if (!g.allFinite()) throw NumericError("adjoint derivative produced a non-finite value");
  return DualVec(std::move(g));
}

namespace {

void check_samples(std::size_t samples) {
  if (samples < 100) throw std::invalid_argument("estimators need at least 100 samples");
}

double sampling_radius(const ForwardProblem& fp) {
  if (!std::isfinite(fp.eps) || !(fp.eps > 0.0))
    throw std::invalid_argument("estimators need a finite positive radius eps");
  return 3.0 * fp.eps;
}

}  // namespace

double estimate_eta(const ForwardProblem& fp, std::size_t samples, std::uint64_t seed) {
  check_samples(samples);
  if (fp.op->is_linear()) return 0.0;
  const double rad = sampling_radius(fp);
  std::mt19937_64 rng(seed);
  double best = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const Vec u = sample_ball(fp.domain, fp.u0, rad, rng);
    const Vec ut = sample_ball(fp.domain, fp.u0, rad, rng);
    const double den = lr_norm(fp.op->difference(u.coords(), ut.coords()), fp.data.r());
    if (!(den > 0.0)) continue;
    const double num = lr_norm(fp.op->linearization_error(u.coords(), ut.coords()), fp.data.r());
    best = std::max(best, num / den);
    ++used;
  }
  if (used == 0) throw NumericError("tangential cone estimate: every sampled pair was degenerate");
  return 1.1 * best;
}

double estimate_stability(const ForwardProblem& fp, const Penalty& pen, std::size_t samples,
                          std::uint64_t seed) {
  check_samples(samples);
  if (pen.dim() != fp.op->domain_dim()) throw DimensionError("penalty does not match domain");
  const double rad = sampling_radius(fp);
  std::mt19937_64 rng(seed);
  double best = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const Vec u = sample_ball(pen.space(), fp.u0, rad, rng);
    const Vec ut = sample_ball(pen.space(), fp.u0, rad, rng);
    const double den = lr_norm(fp.op->difference(u.coords(), ut.coords()), fp.data.r());
    if (!(den > 0.0)) continue;
    const double d = bregman_distance(pen, ut, u, subgradient(pen, u));
    best = std::max(best, d / std::pow(den, pen.p()));
    ++used;
  }
  if (used == 0 || !std::isfinite(best))
    throw NumericError("stability estimate: sampled pairs were degenerate");
  return 1.1 * best;
}

double operator_norm(const Eigen::MatrixXd& a, double p, double q) {
  if (p == 2.0 && q == 2.0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues()(0);
  }
  // Boyd's fixed point x <- psi_{p*}(A^T psi_q(A x)), psi_r(y) = sign(y)|y|^{r-1}.
  const double ps = p / (p - 1.0);
  auto psi = [](const Eigen::VectorXd& y, double r) {
    return y.unaryExpr([r](double t) { return t == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(t), r - 1.0), t); })
        .eval();
  };
  double best = 0.0;
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Ones(a.cols()));
  Eigen::Index jmax = 0;
  a.colwise().norm().maxCoeff(&jmax);
  starts.push_back(Eigen::VectorXd::Unit(a.cols(), jmax));
  for (auto x : starts) {
    x /= lr_norm(x, p);
    for (int it = 0; it < 200; ++it) {
      const Eigen::VectorXd ax = a * x;
      best = std::max(best, lr_norm(ax, q));
      Eigen::VectorXd y = psi(a.transpose() * psi(ax, q), ps);
      const double ny = lr_norm(y, p);
      if (ny == 0.0) break;
      y /= ny;
      if ((y - x).cwiseAbs().maxCoeff() < 1e-14) break;
      x = y;
    }
  }
  return best;
}

double estimate_derivative_bound(const ForwardProblem& fp, std::size_t samples,
                                 std::uint64_t seed) {
  if (samples == 0) throw std::invalid_argument("derivative bound needs samples");
  if (fp.op->is_linear())
    return 1.1 * operator_norm(fp.op->derivative(fp.u0.coords()), fp.domain.r(), fp.data.r());
  const double rad = sampling_radius(fp);
  std::mt19937_64 rng(seed);
  double best = operator_norm(fp.op->derivative(fp.u0.coords()), fp.domain.r(), fp.data.r());
  for (std::size_t k = 0; k < samples; ++k) {
    const Vec u = sample_ball(fp.domain, fp.u0, rad, rng);
    best = std::max(best, operator_norm(fp.op->derivative(u.coords()), fp.domain.r(), fp.data.r()));
  }
  return 1.1 * best;
}

ForwardProblem make_problem(std::shared_ptr<const Operator> op, std::optional<Vec> truth) {
  if (!op) throw std::invalid_argument("forward problem without operator");
  ForwardProblem fp;
  fp.domain = SpaceModel(op->domain_dim(), 2.0);
  fp.data = SpaceModel(op->range_dim(), 2.0);
  fp.u0 = Vec::zero(op->domain_dim());
  fp.gamma0 = DualVec::zero(op->domain_dim());
  if (truth && truth->size() != op->domain_dim()) throw DimensionError("truth does not match domain");
  fp.truth = std::move(truth);
  fp.op = std::move(op);
  return fp;
}

ForwardProblem make_deconv(Eigen::Index n, double kernel_width, double amplitude) {
  if (n < 8) throw std::invalid_argument("deconvolution grid needs n >= 8");
  if (!(kernel_width > 0.0) || std::isnan(kernel_width))
    throw std::invalid_argument("kernel width must be positive");
  const double dn = static_cast<double>(n);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = static_cast<double>(i - j) / dn;
      a(i, j) = std::exp(-d * d / (2.0 * kernel_width * kernel_width)) / dn;
    }
  Vec truth(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / dn;
    if (x > 0.2 && x < 0.45) truth[i] = amplitude;
    if (x > 0.6 && x < 0.8) truth[i] = -0.5 * amplitude;
  }
  return make_problem(std::make_shared<LinearDeconv>(std::move(a)), std::move(truth));
}

ForwardProblem make_diagexp(Eigen::Index n, double sigma_max, double decay, double amplitude) {
  if (n < 1) throw std::invalid_argument("diagonal problem needs n >= 1");
  if (!(sigma_max > 0.0) || !(decay >= 0.0)) throw std::invalid_argument("invalid diagonal scales");
  const double dn = static_cast<double>(n);
  const double pi = std::acos(-1.0);
  Eigen::VectorXd sigma(n);
  Vec truth(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma[i] = sigma_max * std::exp(-decay * static_cast<double>(i) / dn);
    truth[i] = amplitude * std::sin(2.0 * pi * (static_cast<double>(i) + 0.5) / dn);
  }
  return make_problem(std::make_shared<DiagonalExp>(std::move(sigma)), std::move(truth));
}

ForwardProblem calibrate(ForwardProblem fp, const Penalty& pen, const CalibrationOptions& opts) {
  if (!fp.op) throw std::invalid_argument("forward problem without operator");
  if (pen.dim() != fp.op->domain_dim()) throw DimensionError("penalty does not match domain");
  fp.domain = pen.space();
  fp.data = SpaceModel(fp.op->range_dim(), opts.data_r);
  fp.gamma0 = subgradient(pen, fp.u0);
  if (opts.eps) {
    fp.eps = *opts.eps;
  } else {
    if (!fp.truth) throw std::invalid_argument("radius eps must be given when the truth is unknown");
    const double d0 = bregman_distance(pen, *fp.truth, fp.u0, fp.gamma0);
    fp.eps = d0 > 0.0 ? 1.1 * std::pow(d0 / pen.c0(), 1.0 / pen.p()) : 1.0;
  }
  if (!(fp.eps > 0.0) || !std::isfinite(fp.eps)) throw std::invalid_argument("radius eps must be positive");
  fp.eta = opts.eta ? *opts.eta : estimate_eta(fp, opts.samples, opts.seed);
  fp.c_stab = opts.c_stab ? *opts.c_stab : estimate_stability(fp, pen, opts.samples, opts.seed + 1);
  fp.deriv_bound = opts.deriv_bound
                       ? *opts.deriv_bound
                       : estimate_derivative_bound(fp, opts.derivative_samples, opts.seed + 2);
  return fp;
}

}  // namespace tpg
