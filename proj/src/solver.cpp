#include "tpg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace tpg {

std::string to_string(LambdaStrategy s) {
  switch (s) {
    case LambdaStrategy::zero: return "zero";
    case LambdaStrategy::nesterov: return "nesterov";
    case LambdaStrategy::dbts: return "dbts";
  }
  return "?";
}

std::string to_string(AlphaStrategy s) { return s == AlphaStrategy::zero ? "zero" : "rule"; }

std::string to_string(StopReason s) {
  switch (s) {
    case StopReason::discrepancy: return "discrepancy";
    case StopReason::k_max: return "k_max";
    case StopReason::theta5_violation: return "theta5_violation";
  }
  return "?";
}

void SolverConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  need(tau > 1.0 && std::isfinite(tau), "tau must be > 1");
  need(s > 1.0 && std::isfinite(s), "s must be > 1");
  need(theta1 > 0.0 && std::isfinite(theta1), "theta1 must be positive");
  need(theta2bar > 0.0 && theta2bar < theta1, "theta2bar must lie in (0, theta1)");
  need(theta3 > 0.0 && std::isfinite(theta3), "theta3 must be positive");
  need(theta4 > 0.0 && std::isfinite(theta4), "theta4 must be positive");
  need(zeta > 1.0 && std::isfinite(zeta), "zeta must be > 1");
  need(sigma_nesterov >= 3.0 && std::isfinite(sigma_nesterov), "sigma_nesterov must be >= 3");
  need(k_max >= 0, "k_max must be >= 0");
  need(j_max >= 1, "j_max must be >= 1");
  need(h_scale > 0.0 && std::isfinite(h_scale), "h_scale must be positive");
  need(alpha_summable_scale > 0.0 && std::isfinite(alpha_summable_scale),
       "alpha_summable_scale must be positive");
}

std::string Theta5Terms::dominant() const {
  std::pair<double, std::string> terms[] = {
      {convexity, "(C/c0)^(1/p)*theta4 (stability constant C times theta4)"},
      {eta, "eta (tangential cone constant)"},
      {step, "theta1^(p*-1)/(p*(2c0)^(p*-1)) (step-size constant theta1)"},
      {discrepancy, "((C/c0)^(1/p)*theta4 + 1 + eta)/tau (discrepancy constant tau)"}};
  return std::max_element(std::begin(terms), std::end(terms),
                          [](const auto& a, const auto& b) { return a.first < b.first; })
      ->second;
}

Theta5Terms theta5_terms(const SolverConfig& cfg, const Penalty& pen, const ForwardProblem& fp) {
  const double p = pen.p();
  const double ps = pen.p_conj();
  const double c0 = pen.c0();
  const double th4 = cfg.alpha_strategy == AlphaStrategy::zero ? 0.0 : cfg.theta4;
  Theta5Terms t;
  t.convexity = std::pow(fp.c_stab / c0, 1.0 / p) * th4;
  t.eta = fp.eta;
  t.step = std::pow(cfg.theta1, ps - 1.0) / (ps * std::pow(2.0 * c0, ps - 1.0));
  t.discrepancy = (t.convexity + 1.0 + fp.eta) / cfg.tau;
  t.theta6_noisefree = 1.0 - t.convexity - t.eta - t.step;
  t.theta5 = t.theta6_noisefree - t.discrepancy;
  return t;
}

double theta5(const SolverConfig& cfg, const Penalty& pen, const ForwardProblem& fp) {
  return theta5_terms(cfg, pen, fp).theta5;
}

SchemeConstants scheme_constants(const SolverConfig& cfg, const Penalty& pen,
                                 const ForwardProblem& fp, double noise_level) {
  const Theta5Terms t = theta5_terms(cfg, pen, fp);
  SchemeConstants sc;
  sc.p = pen.p();
  sc.p_conj = pen.p_conj();
  sc.c0 = pen.c0();
  sc.eps = fp.eps;
  sc.tau = cfg.tau;
  sc.s = cfg.s;
  sc.zeta = cfg.zeta;
  sc.theta5 = t.theta5;
  sc.theta6_noisefree = t.theta6_noisefree;
  sc.gate = noise_level == 0.0 ? t.theta6_noisefree : t.theta5;
  const double ps = sc.p_conj;
  const double inner = std::pow(std::pow(cfg.theta1, ps - 1.0) - std::pow(cfg.theta2bar, ps - 1.0),
                                1.0 / (ps - 1.0)) /
                       (2.0 * std::pow(fp.deriv_bound, sc.p));
  sc.kappa_h = ps * std::pow(2.0 * sc.c0, ps - 1.0) * sc.gate * std::pow(cfg.tau, sc.p) /
               (2.0 * cfg.zeta) * std::min(inner, cfg.theta3);
  return sc;
}

double select_theta2k(const SolverConfig& cfg, double p_conj, double residual_norm, double t_k) {
  if (!(t_k > 0.0)) return 0.0;
  return std::pow(cfg.theta2bar, p_conj - 1.0) * std::pow(residual_norm, cfg.s) /
         std::pow(t_k, p_conj);
}

double step_size(const SolverConfig& cfg, double p, double residual_norm, double t_k,
                 double theta2_k, double adjoint_norm, double noise_level) {
  if (residual_norm <= cfg.tau * noise_level) return 0.0;
  const double ps = p / (p - 1.0);
  const double second = cfg.theta3 * std::pow(residual_norm, p - cfg.s);
  if (!(adjoint_norm > 0.0)) return second;
  const double rad = std::pow(cfg.theta1, ps - 1.0) * std::pow(residual_norm, cfg.s) -
                     theta2_k * std::pow(t_k, ps);
  if (!(rad > 0.0)) throw std::logic_error("step size radicand is not positive");
  const double first = 0.5 * std::pow(rad, 1.0 / (ps - 1.0)) / std::pow(adjoint_norm, p);
  return std::min(first, second);
}

double select_alpha(const SolverConfig& cfg, double p_conj, int k, double upsilon,
                    double residual_norm, double t_k, double theta2_k, bool noise_free) {
  if (cfg.alpha_strategy == AlphaStrategy::zero) return 0.0;
  if (!(upsilon > 0.0) || !(t_k > 0.0)) return 0.0;
  const double ps = p_conj;
  double a = std::min({cfg.theta4 * upsilon * std::pow(residual_norm, cfg.s - 1.0) / t_k,
                       std::pow(2.0, (1.0 - ps) / ps) * std::pow(theta2_k * upsilon, 1.0 / ps),
                       1.0});
  if (noise_free) {
    const double kk = static_cast<double>(k) + 1.0;
    a = std::min(a, cfg.alpha_summable_scale / (kk * kk));
  }
  return a;
}

double lambda_budget(const SchemeConstants& sc, double lambda, double dgamma_norm) {
  if (lambda == 0.0 || dgamma_norm == 0.0) return 0.0;
  const double ps = sc.p_conj;
  return (lambda + std::pow(lambda, ps)) * std::pow(dgamma_norm, ps) /
         (ps * std::pow(2.0 * sc.c0, ps - 1.0));
}

double select_lambda_nesterov(const SolverConfig& cfg, const SchemeConstants& sc, int k,
                              double dgamma_norm, double noise_level) {
  const double cap = static_cast<double>(k) / (static_cast<double>(k) + cfg.sigma_nesterov);
  if (dgamma_norm == 0.0) return cap;
  double lam =
      std::min(sc.kappa_h * std::pow(noise_level, sc.p) / std::pow(dgamma_norm, sc.p_conj), cap);
  const double limit = sc.c0 * std::pow(sc.eps, sc.p);
  if (lambda_budget(sc, lam, dgamma_norm) > limit) {
    double lo = 0.0;
    double hi = lam;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (lambda_budget(sc, mid, dgamma_norm) <= limit ? lo : hi) = mid;
    }
    lam = lo;
  }
  return lam;
}

std::pair<bool, bool> check_lambda_admissible(const SchemeConstants& sc, double lambda,
                                              double dgamma_norm, double upsilon,
                                              double residual_norm) {
  const double lhs = lambda_budget(sc, lambda, dgamma_norm);
  const bool a = lhs <= sc.gate * upsilon * std::pow(residual_norm, sc.s) / sc.zeta;
  const bool b = lhs <= sc.c0 * std::pow(sc.eps, sc.p);
  return {a, b};
}

DbtsChoice select_lambda_dbts(const SolverConfig& cfg, const SchemeConstants& sc, int k,
                              double dgamma_norm, long prev_index, double noise_level,
                              const std::function<DbtsProbe(double)>& probe) {
  if (dgamma_norm == 0.0) return {0.0, prev_index + 1, false};
  const double ps = sc.p_conj;
  const double cap = static_cast<double>(k) / (static_cast<double>(k) + cfg.sigma_nesterov);
  const double ball = ps * std::pow(2.0 * sc.c0, ps) * std::pow(sc.eps, sc.p) /
                      (4.0 * std::pow(dgamma_norm, ps));
  auto pi = [&](long i) {
    const double ii = static_cast<double>(i) + 1.0;
    return std::min({cfg.h_scale / (ii * ii) / dgamma_norm, ball, cap});
  };
  for (int j = 1; j <= cfg.j_max; ++j) {
    const double lam = pi(prev_index + j);
    const DbtsProbe pr = probe(lam);
    if (pr.residual_norm <= cfg.tau * noise_level) return {0.0, prev_index + j, false};
    if (lambda_budget(sc, lam, dgamma_norm) <=
        sc.gate * pr.upsilon * std::pow(pr.residual_norm, sc.s) / sc.zeta)
      return {lam, prev_index + j, false};
  }
  return {select_lambda_nesterov(cfg, sc, k, dgamma_norm, noise_level), prev_index + cfg.j_max,
          true};
}

namespace {

struct Evaluation {
  double lambda = 0.0;
  DualVec xi;
  Vec w;
  Vec residual;
  double residual_norm = 0.0;
  double t_k = 0.0;
  double theta2_k = 0.0;
  double upsilon = 0.0;
  DualVec descent;  // L(w)^* J_s(r)
};

void require_finite(const DualVec& x, int k, const char* what) {
  if (!x.all_finite())
    throw NumericError(std::string(what) + " became non-finite at iteration " + std::to_string(k));
}

}  // namespace

IterationTrace iterate(const SolverConfig& cfg, const Penalty& pen, const ForwardProblem& fp,
                       const Vec& v_delta, double noise_level) {
  cfg.validate();
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level))
    throw std::invalid_argument("noise level must be finite and >= 0");
  if (!fp.op) throw std::invalid_argument("forward problem without operator");
  if (pen.dim() != fp.op->domain_dim()) throw DimensionError("penalty does not match domain");
  if (v_delta.size() != fp.op->range_dim()) throw DimensionError("data does not match range");
  if (fp.gamma0.size() != pen.dim() || fp.u0.size() != pen.dim())
    throw DimensionError("initial guess does not match domain");

  IterationTrace trace;
  trace.noise_level = noise_level;
  trace.lambda_strategy = cfg.lambda_strategy;
  trace.problem = fp.op->name() + "/" + std::to_string(pen.dim()) + "/" + to_string(pen.kind()) +
                  "/" + to_string(cfg.lambda_strategy);
  trace.terms = theta5_terms(cfg, pen, fp);
  const SchemeConstants sc = scheme_constants(cfg, pen, fp, noise_level);
  trace.constants = sc;
  if (!(sc.gate > 0.0)) {
    trace.stop_reason = StopReason::theta5_violation;
    return trace;
  }

  const SpaceModel& dom = pen.space();
  const bool noise_free = noise_level == 0.0;
  const double threshold = cfg.tau * noise_level;
  const DualVec xi0 = fp.gamma0;

  IterationState st;
  st.gamma_prev = fp.gamma0;
  st.gamma_cur = fp.gamma0;
  st.u_cur = conjugate_grad(pen, st.gamma_cur);

  auto evaluate = [&](double lambda, const DualVec& dgamma) {
    Evaluation ev;
    ev.lambda = lambda;
    ev.xi = lambda == 0.0 ? st.gamma_cur : st.gamma_cur + lambda * dgamma;
    require_finite(ev.xi, st.k, "extrapolated dual iterate");
    ev.w = conjugate_grad(pen, ev.xi);
    ev.residual = apply(fp, ev.w) - v_delta;
    ev.residual_norm = norm(fp.data, ev.residual);
    ev.t_k = norm(dom, ev.xi - xi0);
    ev.theta2_k = select_theta2k(cfg, sc.p_conj, ev.residual_norm, ev.t_k);
    if (ev.residual_norm > threshold) {
      ev.descent = deriv_adjoint(fp, ev.w, duality_map(fp.data, cfg.s, ev.residual));
      ev.upsilon = step_size(cfg, sc.p, ev.residual_norm, ev.t_k, ev.theta2_k,
                             norm(dom, ev.descent), noise_level);
    } else {
      ev.descent = DualVec::zero(pen.dim());
    }
    return ev;
  };

  const bool have_truth = fp.truth.has_value();
  double d_prev = have_truth ? bregman_distance(pen, *fp.truth, st.u_cur, st.gamma_cur)
                             : std::numeric_limits<double>::quiet_NaN();
  double step_sum = 0.0;
  double alpha_sum = 0.0;
  double lambda_sum = 0.0;

  for (st.k = 0;; ++st.k) {
    const DualVec dgamma = st.gamma_cur - st.gamma_prev;
    const double dg_norm = norm(dom, dgamma);

    std::optional<Evaluation> ev;
    double lambda = 0.0;
    switch (cfg.lambda_strategy) {
      case LambdaStrategy::zero:
        break;
      case LambdaStrategy::nesterov:
        lambda = select_lambda_nesterov(cfg, sc, st.k, dg_norm, noise_level);
        break;
      case LambdaStrategy::dbts: {
        const DbtsChoice choice = select_lambda_dbts(
            cfg, sc, st.k, dg_norm, st.i_dbts, noise_level, [&](double lam) {
              ev = evaluate(lam, dgamma);
              return DbtsProbe{ev->residual_norm, ev->upsilon};
            });
        lambda = choice.lambda;
        st.i_dbts = choice.index;
        break;
      }
    }
    if (!ev || ev->lambda != lambda) ev = evaluate(lambda, dgamma);
    if (lambda != 0.0 && ev->residual_norm <= threshold) {
      lambda = 0.0;
      ev = evaluate(0.0, dgamma);
    }

    st.lambda = lambda;
    st.xi = ev->xi;
    st.w_cur = ev->w;
    st.residual = ev->residual;
    st.residual_norm = ev->residual_norm;
    st.t_k = ev->t_k;
    st.theta2_k = ev->theta2_k;
    st.upsilon = ev->upsilon;
    st.alpha = select_alpha(cfg, sc.p_conj, st.k, st.upsilon, st.residual_norm, st.t_k,
                            st.theta2_k, noise_free);

    StepRecord rec;
    rec.k = st.k;
    rec.residual_norm = st.residual_norm;
    rec.upsilon = st.upsilon;
    rec.lambda = st.lambda;
    rec.alpha = st.alpha;
    rec.t_k = st.t_k;
    rec.theta2_k = st.theta2_k;
    rec.u_dist = norm(dom, st.u_cur - fp.u0);
    rec.w_dist = norm(dom, st.w_cur - fp.u0);
    rec.dgamma_norm = dg_norm;
    rec.gamma0_dist = norm(dom, xi0 - st.gamma_cur);
    rec.dbts_index = cfg.lambda_strategy == LambdaStrategy::dbts ? st.i_dbts : -1;
    std::tie(rec.adm_step, rec.adm_ball) =
        check_lambda_admissible(sc, st.lambda, dg_norm, st.upsilon, st.residual_norm);
    if (have_truth) {
      rec.bregman_to_truth = bregman_distance(pen, *fp.truth, st.u_cur, st.gamma_cur);
      rec.theta_k = rec.bregman_to_truth - d_prev;
      d_prev = rec.bregman_to_truth;
    } else {
      rec.bregman_to_truth = std::numeric_limits<double>::quiet_NaN();
      rec.theta_k = std::numeric_limits<double>::quiet_NaN();
    }
    step_sum += st.upsilon * std::pow(st.residual_norm, cfg.s);
    alpha_sum += st.alpha * rec.gamma0_dist;
    lambda_sum += st.lambda * dg_norm;
    rec.step_sum = step_sum;
    rec.alpha_sum = alpha_sum;
    rec.lambda_sum = lambda_sum;
    trace.steps.push_back(rec);

    if (st.residual_norm <= threshold) {
      trace.stop_reason = StopReason::discrepancy;
      break;
    }
    if (st.k >= cfg.k_max) {
      trace.stop_reason = StopReason::k_max;
      break;
    }

    DualVec next = st.alpha == 0.0
                       ? st.xi - st.upsilon * ev->descent
                       : (1.0 - st.alpha) * st.xi - st.upsilon * ev->descent + st.alpha * xi0;
    require_finite(next, st.k, "dual iterate");
    st.gamma_prev = std::move(st.gamma_cur);
    st.gamma_cur = std::move(next);
    st.u_cur = conjugate_grad(pen, st.gamma_cur);
  }
  trace.stop_index = st.k;
  trace.final_state = st;
  return trace;
}

}  // namespace tpg
