#pragma once

#include "tpg/experiment.hpp"
#include "tpg/operators.hpp"
#include "tpg/penalty.hpp"
#include "tpg/solver.hpp"

#include <utility>

namespace fixture {

struct Setup {
  tpg::Penalty pen;
  tpg::ForwardProblem fp;
  tpg::Vec v;
};

inline Setup deconv(const tpg::Penalty& pen, Eigen::Index n = 64) {
  tpg::ForwardProblem fp = tpg::calibrate(tpg::make_deconv(n, 0.03, 10.0), pen, {});
  tpg::Vec v = tpg::apply(fp, *fp.truth);
  return {pen, std::move(fp), std::move(v)};
}

inline Setup deconv(Eigen::Index n = 64) { return deconv(tpg::Penalty::power_norm(n, 2.0), n); }

inline Setup diagexp(const tpg::Penalty& pen) {
  tpg::ForwardProblem fp = tpg::calibrate(tpg::make_diagexp(pen.dim(), 10.0, 2.0, 0.02), pen, {});
  tpg::Vec v = tpg::apply(fp, *fp.truth);
  return {pen, std::move(fp), std::move(v)};
}

inline Setup diagexp(Eigen::Index n = 32) { return diagexp(tpg::Penalty::power_norm(n, 2.0)); }

inline tpg::SolverConfig config(tpg::LambdaStrategy lam,
                                tpg::AlphaStrategy alpha = tpg::AlphaStrategy::rule) {
  tpg::SolverConfig cfg;
  cfg.lambda_strategy = lam;
  cfg.alpha_strategy = alpha;
  return cfg;
}

inline tpg::IterationTrace run(const Setup& s, const tpg::SolverConfig& cfg, double delta,
                               std::uint64_t seed = 7) {
  return tpg::iterate(cfg, s.pen, s.fp, tpg::add_noise(s.v, delta, seed), delta);
}

}  // namespace fixture
