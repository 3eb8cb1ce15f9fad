#pragma once

#include "tpg/geometry.hpp"
#include "tpg/operators.hpp"
#include "tpg/penalty.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace tpg {

enum class LambdaStrategy { zero, nesterov, dbts };
enum class AlphaStrategy { zero, rule };
enum class StopReason { discrepancy, k_max, theta5_violation };

std::string to_string(LambdaStrategy s);
std::string to_string(AlphaStrategy s);
std::string to_string(StopReason s);

struct SolverConfig {
  double tau = 5.0;
  double s = 2.0;
  double theta1 = 0.2;
  double theta2bar = 0.1;
  double theta3 = 1000.0;
  double theta4 = 1e-3;
  double zeta = 2.0;
  double sigma_nesterov = 3.0;
  LambdaStrategy lambda_strategy = LambdaStrategy::dbts;
  AlphaStrategy alpha_strategy = AlphaStrategy::rule;
  int k_max = 5000;
  int j_max = 5;
  double h_scale = 1.0;
  double alpha_summable_scale = 1.0;

  // Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

struct Theta5Terms {
  double convexity = 0.0;    // (C/c0)^{1/p} theta4
  double eta = 0.0;
  double step = 0.0;         // theta1^{p*-1} / (p* (2c0)^{p*-1})
  double discrepancy = 0.0;  // ((C/c0)^{1/p} theta4 + 1 + eta) / tau
  double theta5 = 0.0;
  double theta6_noisefree = 0.0;  // theta5 without the discrepancy term

  std::string dominant() const;
};

// With the zero alpha strategy theta4 does not enter the scheme and is taken as 0.
Theta5Terms theta5_terms(const SolverConfig& cfg, const Penalty& pen, const ForwardProblem& fp);
double theta5(const SolverConfig& cfg, const Penalty& pen, const ForwardProblem& fp);

struct SchemeConstants {
  double p = 2.0;
  double p_conj = 2.0;
  double c0 = 0.5;
  double eps = 1.0;
  double tau = 5.0;
  double s = 2.0;
  double zeta = 2.0;
  double theta5 = 0.0;
  double theta6_noisefree = 0.0;
  double gate = 0.0;  // theta5, or theta6_noisefree for exact data
  double kappa_h = 0.0;
};

SchemeConstants scheme_constants(const SolverConfig& cfg, const Penalty& pen,
                                 const ForwardProblem& fp, double noise_level);

double select_theta2k(const SolverConfig& cfg, double p_conj, double residual_norm, double t_k);

double step_size(const SolverConfig& cfg, double p, double residual_norm, double t_k,
                 double theta2_k, double adjoint_norm, double noise_level);

double select_alpha(const SolverConfig& cfg, double p_conj, int k, double upsilon,
                    double residual_norm, double t_k, double theta2_k, bool noise_free);

// Left side shared by both admissibility inequalities.
double lambda_budget(const SchemeConstants& sc, double lambda, double dgamma_norm);

double select_lambda_nesterov(const SolverConfig& cfg, const SchemeConstants& sc, int k,
                              double dgamma_norm, double noise_level);

std::pair<bool, bool> check_lambda_admissible(const SchemeConstants& sc, double lambda,
                                              double dgamma_norm, double upsilon,
                                              double residual_norm);

struct DbtsProbe {
  double residual_norm = 0.0;
  double upsilon = 0.0;
};

struct DbtsChoice {
  double lambda = 0.0;
  long index = 0;
  bool fallback = false;  // all probes failed, lambda taken from the Nesterov cap
};

DbtsChoice select_lambda_dbts(const SolverConfig& cfg, const SchemeConstants& sc, int k,
                              double dgamma_norm, long prev_index, double noise_level,
                              const std::function<DbtsProbe(double)>& probe);

struct IterationState {
  DualVec gamma_prev;
  DualVec gamma_cur;
  DualVec xi;
  Vec u_cur;
  Vec w_cur;
  Vec residual;
  double residual_norm = 0.0;
  double t_k = 0.0;
  double upsilon = 0.0;
  double lambda = 0.0;
  double alpha = 0.0;
  int k = 0;
  long i_dbts = -1;
  double theta2_k = 0.0;
};

struct StepRecord {
  int k = 0;
  double residual_norm = 0.0;
  double upsilon = 0.0;
  double lambda = 0.0;
  double alpha = 0.0;
  double t_k = 0.0;
  double bregman_to_truth = 0.0;  // NaN without a truth
  double theta_k = 0.0;           // D_k - D_{k-1}
  double theta2_k = 0.0;
  double u_dist = 0.0;            // ||u_k - u0||
  double w_dist = 0.0;            // ||w_k - u0||
  double dgamma_norm = 0.0;       // ||gamma_k - gamma_{k-1}||
  double gamma0_dist = 0.0;       // ||gamma_0 - gamma_k||
  long dbts_index = -1;
  bool adm_step = true;
  bool adm_ball = true;
  double step_sum = 0.0;          // sum_{r<=k} upsilon_r ||r_r||^s
  double alpha_sum = 0.0;         // sum_{r<=k} alpha_r ||gamma_0 - gamma_r||
  double lambda_sum = 0.0;        // sum_{r<=k} lambda_r ||gamma_r - gamma_{r-1}||
};

struct IterationTrace {
  std::vector<StepRecord> steps;
  int stop_index = 0;
  StopReason stop_reason = StopReason::k_max;
  double noise_level = 0.0;
  LambdaStrategy lambda_strategy = LambdaStrategy::zero;
  std::string problem;
  SchemeConstants constants;
  Theta5Terms terms;
  IterationState final_state;  // state at k_delta

  const Vec& solution() const { return final_state.u_cur; }
  const DualVec& solution_gamma() const { return final_state.gamma_cur; }
};

IterationTrace iterate(const SolverConfig& cfg, const Penalty& pen, const ForwardProblem& fp,
                       const Vec& v_delta, double noise_level);

}  // namespace tpg
