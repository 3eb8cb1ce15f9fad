#include "tpg/diagnostics.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tpg {

TheoryReport audit(const IterationTrace& trace, const AuditInputs& in) {
  TheoryReport rep;
  rep.theta5 = in.gate;
  rep.initial_bregman = in.initial_bregman.value_or(std::numeric_limits<double>::quiet_NaN());
  rep.initial_guess_check =
      in.initial_bregman && *in.initial_bregman <= in.c0 * std::pow(in.eps, in.p);
  if (in.initial_bregman && !rep.initial_guess_check)
    rep.violations.push_back({0, "initial_guess", "D(u_dagger, u0) <= c0 eps^p", *in.initial_bregman,
                              in.c0 * std::pow(in.eps, in.p)});
  if (trace.stop_reason == StopReason::theta5_violation || trace.steps.empty()) {
    rep.violations.push_back({0, "theta5", "theta5 > 0", in.gate, 0.0});
    return rep;
  }
  rep.has_truth = in.initial_bregman.has_value() && std::isfinite(trace.steps.front().bregman_to_truth);

  rep.sum_bound_budget = rep.has_truth ? in.zeta / (in.zeta - 1.0) / in.gate * *in.initial_bregman
                                       : std::numeric_limits<double>::infinity();
  rep.sum_bound_slack = rep.sum_bound_budget;
  rep.max_theta_k = -std::numeric_limits<double>::infinity();
  const double u_rad = 2.0 * in.eps + 1e-9;
  const double w_rad = 3.0 * in.eps + 1e-9;

  long prev_index = -1;
  for (const StepRecord& r : trace.steps) {
    if (rep.has_truth) {
      if (r.k > 0) rep.max_theta_k = std::max(rep.max_theta_k, r.theta_k);
      if (r.theta_k > 1e-10) {
        ++rep.monotone_violations;
        rep.violations.push_back(
            {r.k, "monotonicity", "Theta_k <= 0: Bregman distance to the solution is non-increasing",
             r.theta_k, 1e-10});
      }
      rep.sum_bound_slack = std::min(rep.sum_bound_slack, rep.sum_bound_budget - r.step_sum);
      if (r.step_sum > rep.sum_bound_budget + 1e-8)
        rep.violations.push_back({r.k, "sum_bound",
                                  "sum upsilon_r ||r_r||^s <= zeta/((zeta-1) theta5) D(u_dagger, u0)",
                                  r.step_sum, rep.sum_bound_budget});
    }
    if (r.u_dist > u_rad) {
      ++rep.ball_violations;
      rep.violations.push_back({r.k, "ball_u", "||u_k - u0|| <= 2 eps", r.u_dist, u_rad});
    }
    if (r.w_dist > w_rad) {
      ++rep.ball_violations;
      rep.violations.push_back({r.k, "ball_w", "||w_k - u0|| <= 3 eps", r.w_dist, w_rad});
    }
    if (r.lambda != 0.0 && !(r.adm_step && r.adm_ball)) {
      ++rep.admissibility_violations;
      rep.violations.push_back({r.k, "admissibility",
                                "lambda_k satisfies both admissibility inequalities", r.lambda, 0.0});
    }
    if (r.upsilon == 0.0 && r.lambda != 0.0)
      rep.violations.push_back({r.k, "admissibility", "lambda_k = 0 whenever upsilon_k = 0",
                                r.lambda, 0.0});
    if (trace.lambda_strategy == LambdaStrategy::dbts) {
      const long inc = r.dbts_index - prev_index;
      if (inc < 1 || inc > in.j_max) {
        ++rep.dbts_index_violations;
        rep.violations.push_back({r.k, "dbts_index", "1 <= i_k - i_{k-1} <= j_max",
                                  static_cast<double>(inc), static_cast<double>(in.j_max)});
      }
      prev_index = r.dbts_index;
    }
  }
  if (trace.steps.size() == 1) rep.max_theta_k = 0.0;
  rep.alpha_partial = trace.steps.back().alpha_sum;
  rep.lambda_partial = trace.steps.back().lambda_sum;
  return rep;
}

TheoryReport audit(const IterationTrace& trace, const Penalty& pen, const ForwardProblem& fp,
                   const SolverConfig& cfg, const std::optional<Vec>& truth) {
  AuditInputs in;
  in.gate = trace.constants.gate;
  in.zeta = cfg.zeta;
  in.s = cfg.s;
  in.p = pen.p();
  in.c0 = pen.c0();
  in.eps = fp.eps;
  in.j_max = cfg.j_max;
  if (truth) in.initial_bregman = bregman_distance(pen, *truth, fp.u0, fp.gamma0);
  return audit(trace, in);
}

SweepTable delta_sweep_report(const std::vector<IterationTrace>& traces, const Penalty& pen,
                              const SweepReference& reference) {
  if (traces.size() < 3) throw std::invalid_argument("a sweep needs at least 3 noise levels");
  for (const auto& t : traces) {
    if (t.problem != traces.front().problem)
      throw std::invalid_argument("sweep traces come from different problems or strategies");
    if (t.stop_reason == StopReason::theta5_violation)
      throw std::invalid_argument("sweep contains a refused run");
  }
  SweepTable table;
  for (const auto& t : traces) {
    const Vec ref = reference(t);
    SweepRow row;
    row.delta = t.noise_level;
    row.k_delta = t.stop_index;
    row.stop_reason = t.stop_reason;
    row.residual_norm = t.final_state.residual_norm;
    row.bregman = bregman_distance(pen, ref, t.solution(), t.solution_gamma());
    row.error = norm(pen.space(), t.solution() - ref);
    table.rows.push_back(row);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.delta > b.delta; });
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const SweepRow& a = table.rows[i - 1];
    const SweepRow& b = table.rows[i];
    if (b.delta == a.delta) continue;
    if (b.bregman > 1.05 * a.bregman) {
      table.trend_ok = false;
      table.notes.push_back("Bregman distance rises from delta=" + std::to_string(a.delta) +
                            " to delta=" + std::to_string(b.delta));
    }
    if (b.error > 1.05 * a.error) {
      table.trend_ok = false;
      table.notes.push_back("error norm rises from delta=" + std::to_string(a.delta) +
                            " to delta=" + std::to_string(b.delta));
    }
  }
  return table;
}

SweepTable delta_sweep_report(const std::vector<IterationTrace>& traces, const Penalty& pen,
                              const Vec& truth) {
  return delta_sweep_report(traces, pen, [&truth](const IterationTrace&) { return truth; });
}

bool numerically_rank_deficient(const Eigen::MatrixXd& a, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  return sv.size() == 0 || sv(sv.size() - 1) <= rel_tol * sv(0) ||
         a.rows() < a.cols();
}

Vec solution_set_projection(const Eigen::MatrixXd& a, const Vec& v, const Vec& u, double rel_tol) {
  if (a.cols() != u.size() || a.rows() != v.size()) throw DimensionError("projection shape mismatch");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  cod.setThreshold(rel_tol);
  const Eigen::VectorXd corr = cod.solve(v.coords() - a * u.coords());
  return Vec(u.coords() + corr);
}

}  // namespace tpg
