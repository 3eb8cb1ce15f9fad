#pragma once

#include "tpg/operators.hpp"
#include "tpg/penalty.hpp"
#include "tpg/solver.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tpg {

struct Violation {
  int k = 0;
  std::string check;      // monotonicity | sum_bound | ball_u | ball_w | admissibility | ...
  std::string statement;  // the inequality that failed
  double value = 0.0;
  double bound = 0.0;
};

struct TheoryReport {
  double theta5 = 0.0;
  bool has_truth = false;
  std::size_t monotone_violations = 0;
  double max_theta_k = 0.0;
  double sum_bound_budget = 0.0;
  double sum_bound_slack = 0.0;
  std::size_t ball_violations = 0;
  std::size_t admissibility_violations = 0;
  std::size_t dbts_index_violations = 0;
  double alpha_partial = 0.0;   // sum alpha_k ||gamma_0 - gamma_k||
  double lambda_partial = 0.0;  // sum lambda_k ||gamma_k - gamma_{k-1}||
  double initial_bregman = 0.0;
  bool initial_guess_check = false;
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

// Everything audit needs besides the trace rows; recoverable from a run summary.
struct AuditInputs {
  double gate = 0.0;  // theta5 (or its exact-data counterpart)
  double zeta = 2.0;
  double s = 2.0;
  double p = 2.0;
  double c0 = 0.5;
  double eps = 1.0;
  int j_max = 5;
  std::optional<double> initial_bregman;  // D_{gamma0}(u_dagger, u0)
};

TheoryReport audit(const IterationTrace& trace, const AuditInputs& in);
TheoryReport audit(const IterationTrace& trace, const Penalty& pen, const ForwardProblem& fp,
                   const SolverConfig& cfg, const std::optional<Vec>& truth);

struct SweepRow {
  double delta = 0.0;
  int k_delta = 0;
  StopReason stop_reason = StopReason::k_max;
  double residual_norm = 0.0;
  double bregman = 0.0;
  double error = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;  // sorted by decreasing delta
  bool trend_ok = true;
  std::vector<std::string> notes;
};

// Reference solution per trace; u_dagger for well-posed-on-the-ball problems.
using SweepReference = std::function<Vec(const IterationTrace&)>;

SweepTable delta_sweep_report(const std::vector<IterationTrace>& traces, const Penalty& pen,
                              const Vec& truth);
SweepTable delta_sweep_report(const std::vector<IterationTrace>& traces, const Penalty& pen,
                              const SweepReference& reference);

bool numerically_rank_deficient(const Eigen::MatrixXd& a, double rel_tol = 1e-12);

// Nearest point to u in {w : A w = v} (l^2 projection via least squares).
Vec solution_set_projection(const Eigen::MatrixXd& a, const Vec& v, const Vec& u,
                            double rel_tol = 1e-12);

}  // namespace tpg
