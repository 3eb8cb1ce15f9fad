#include "doctest.h"

#include "fixtures.hpp"
#include "tpg/diagnostics.hpp"
#include "tpg/solver.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace tpg;

namespace {

SchemeConstants simple_constants() {
  SchemeConstants sc;
  sc.p = 2.0;
  sc.p_conj = 2.0;
  sc.c0 = 0.5;
  sc.eps = 1.0;
  sc.tau = 5.0;
  sc.s = 2.0;
  sc.zeta = 2.0;
  sc.theta5 = 0.5;
  sc.gate = 0.5;
  sc.kappa_h = 1.0;
  return sc;
}

ForwardProblem constants_only(double c_stab, double eta) {
  ForwardProblem fp = make_problem(std::make_shared<LinearDeconv>(Eigen::MatrixXd::Identity(2, 2)),
                                   std::nullopt);
  fp.c_stab = c_stab;
  fp.eta = eta;
  fp.eps = 1.0;
  fp.deriv_bound = 1.0;
  return fp;
}

}  // namespace

TEST_CASE("config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.theta2bar = cfg.theta1;
  CHECK_THROWS(cfg.validate());
  cfg = SolverConfig{};
  cfg.tau = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = SolverConfig{};
  cfg.sigma_nesterov = 2.5;
  CHECK_THROWS(cfg.validate());
  cfg = SolverConfig{};
  cfg.zeta = 1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("theta5 examples") {
  const Penalty pen = Penalty::quadratic_l1(2, 0.0);
  SolverConfig cfg;
  cfg.theta4 = 0.0;
  cfg.theta1 = 1e-14;
  cfg.tau = 1e14;
  CHECK(theta5(cfg, pen, constants_only(0.5, 0.0)) == doctest::Approx(1.0).epsilon(1e-12));

  cfg = SolverConfig{};
  cfg.theta4 = 0.1;
  cfg.theta1 = 0.2;
  cfg.tau = 10.0;
  const double t5 = theta5(cfg, pen, constants_only(0.5, 0.1));
  CHECK(std::abs(t5 - 0.58) <= 1e-12);
  const Theta5Terms terms = theta5_terms(cfg, pen, constants_only(0.5, 0.1));
  CHECK(terms.theta6_noisefree == doctest::Approx(0.7));

  cfg.alpha_strategy = AlphaStrategy::zero;
  CHECK(theta5(cfg, pen, constants_only(0.5, 0.1)) == doctest::Approx(1 - 0.1 - 0.1 - 0.11));

  cfg = SolverConfig{};
  const Theta5Terms bad = theta5_terms(cfg, pen, constants_only(0.5, 0.95));
  CHECK(bad.theta5 < 0.0);
  CHECK(bad.dominant().find("eta") == 0);
}

TEST_CASE("step size examples") {
  SolverConfig cfg;
  CHECK(step_size(cfg, 2.0, 0.5 * cfg.tau * 0.1, 1.0, 0.0, 1.0, 0.1) == 0.0);
  cfg.theta1 = 0.5;
  cfg.theta3 = 10.0;
  CHECK(step_size(cfg, 2.0, 2.0, 0.0, 0.0, 1.0, 0.0) == doctest::Approx(1.0));
  CHECK(step_size(cfg, 2.0, 2.0, 3.0, 0.0, 0.0, 0.1) == doctest::Approx(10.0));
  cfg.s = 1.5;
  CHECK(step_size(cfg, 3.0, 2.0, 3.0, 0.0, 0.0, 0.1) == doctest::Approx(10.0 * std::pow(2.0, 1.5)));
  // noise-free: only r = 0 gives a zero step
  CHECK(step_size(cfg, 2.0, 0.0, 1.0, 0.0, 1.0, 0.0) == 0.0);
  CHECK(step_size(cfg, 2.0, 1e-30, 1.0, 0.0, 1.0, 0.0) > 0.0);
  CHECK_THROWS_AS(step_size(cfg, 2.0, 2.0, 10.0, 100.0, 1.0, 0.0), std::logic_error);
}

TEST_CASE("theta2k selection") {
  SolverConfig cfg;
  CHECK(select_theta2k(cfg, 2.0, 2.0, 0.0) == 0.0);
  cfg.theta2bar = 0.3;
  CHECK(select_theta2k(cfg, 2.0, 2.0, 4.0) == doctest::Approx(0.075));
  cfg = SolverConfig{};
  for (double ps : {1.25, 1.5, 2.0})
    for (double r : {1e-3, 0.5, 7.0})
      for (double t : {1e-2, 1.0, 30.0}) {
        const double th2 = select_theta2k(cfg, ps, r, t);
        const double rad = std::pow(cfg.theta1, ps - 1) * std::pow(r, cfg.s) - th2 * std::pow(t, ps);
        CHECK(rad == doctest::Approx((std::pow(cfg.theta1, ps - 1) - std::pow(cfg.theta2bar, ps - 1)) *
                                     std::pow(r, cfg.s)));
        CHECK(rad > 0.0);
      }
}

TEST_CASE("alpha selection") {
  SolverConfig cfg;
  cfg.theta4 = 0.1;
  CHECK(select_alpha(cfg, 2.0, 5, 0.0, 2.0, 4.0, 0.25, false) == 0.0);
  CHECK(select_alpha(cfg, 2.0, 5, 1.0, 2.0, 4.0, 0.25, false) == doctest::Approx(0.05));
  CHECK(select_alpha(cfg, 2.0, 5, 1.0, 2.0, 0.0, 0.25, false) == 0.0);
  CHECK(select_alpha(cfg, 2.0, 5, 1.0, 2.0, 4.0, 0.25, true) == doctest::Approx(1.0 / 36));
  cfg.theta4 = 100.0;
  CHECK(select_alpha(cfg, 2.0, 5, 1.0, 2.0, 4.0, 4.0, false) == 1.0);
  cfg.alpha_strategy = AlphaStrategy::zero;
  CHECK(select_alpha(cfg, 2.0, 5, 1.0, 2.0, 4.0, 0.25, false) == 0.0);
}

TEST_CASE("Nesterov combination parameter") {
  const SolverConfig cfg;
  const SchemeConstants sc = simple_constants();
  CHECK(select_lambda_nesterov(cfg, sc, 0, 0.0, 0.1) == 0.0);
  CHECK(select_lambda_nesterov(cfg, sc, 0, 2.0, 0.1) == 0.0);
  CHECK(select_lambda_nesterov(cfg, sc, 6, 2.0, 0.0) == 0.0);
  CHECK(select_lambda_nesterov(cfg, sc, 6, 0.0, 0.0) == doctest::Approx(6.0 / 9.0));
  CHECK(select_lambda_nesterov(cfg, sc, 6, 1e-4, 0.1) == doctest::Approx(6.0 / 9.0));
  const double lam = select_lambda_nesterov(cfg, sc, 6, 1e-1, 0.1);
  CHECK(lam == doctest::Approx(6.0 / 9.0));
  CHECK(select_lambda_nesterov(cfg, sc, 6, 1.0, 0.1) == doctest::Approx(0.01));

  SchemeConstants big = sc;
  big.kappa_h = 1e30;
  const double huge = select_lambda_nesterov(cfg, big, 50, 1e6, 1.0);
  CHECK(huge < 1e-11);
  CHECK(huge > 0.0);
  CHECK(lambda_budget(big, huge, 1e6) <= big.c0 * std::pow(big.eps, big.p));
  CHECK(lambda_budget(big, huge * 1.01, 1e6) > big.c0 * std::pow(big.eps, big.p));
}

TEST_CASE("admissibility examples") {
  const SchemeConstants sc = simple_constants();
  CHECK(check_lambda_admissible(sc, 0.0, 3.0, 0.0, 1.0) == std::pair{true, true});
  CHECK(check_lambda_admissible(sc, 0.7, 0.0, 0.0, 1.0) == std::pair{true, true});
  CHECK(lambda_budget(sc, 0.5, 1.0) == doctest::Approx(0.375));
  CHECK(check_lambda_admissible(sc, 0.5, 1.0, 1.0, 2.0) == std::pair{true, true});
  CHECK(check_lambda_admissible(sc, 0.5, 1.0, 0.1, 2.0) == std::pair{false, true});
  CHECK(check_lambda_admissible(sc, 0.9, 1.2, 10.0, 2.0) == std::pair{true, false});
}

TEST_CASE("DBTS selection with scripted probes") {
  SolverConfig cfg;
  const SchemeConstants sc = simple_constants();
  const double delta = 0.1;

  SUBCASE("first probe meets the discrepancy level") {
    int calls = 0;
    const DbtsChoice c = select_lambda_dbts(cfg, sc, 4, 1.0, 3, delta, [&](double) {
      ++calls;
      return DbtsProbe{0.4 * cfg.tau * delta, 0.0};
    });
    CHECK(c.lambda == 0.0);
    CHECK(c.index == 4);
    CHECK(calls == 1);
  }
  SUBCASE("zero increment of the dual iterate") {
    const DbtsChoice c = select_lambda_dbts(cfg, sc, 4, 0.0, 3, delta, [](double) -> DbtsProbe {
      FAIL("no probe expected");
      return {};
    });
    CHECK(c.lambda == 0.0);
    CHECK(c.index == 4);
  }
  SUBCASE("candidate sequence and acceptance on the third probe") {
    std::vector<double> seen;
    const double dg = 0.3;
    const DbtsChoice c = select_lambda_dbts(cfg, sc, 10, dg, 1, delta, [&](double lam) {
      seen.push_back(lam);
      // (3.16)-type test passes once upsilon is large
      return DbtsProbe{1.0, seen.size() == 3 ? 100.0 : 0.0};
    });
    REQUIRE(seen.size() == 3);
    for (int j = 1; j <= 3; ++j) {
      const double i = 1 + j;
      const double expect = std::min({1.0 / ((i + 1) * (i + 1)) / dg,
                                      2.0 * 1.0 * 1.0 / (4 * dg * dg), 10.0 / 13.0});
      CHECK(seen[j - 1] == doctest::Approx(expect));
    }
    CHECK(c.lambda == seen[2]);
    CHECK(c.index == 4);
    CHECK_FALSE(c.fallback);
  }
  SUBCASE("all probes fail") {
    int calls = 0;
    const DbtsChoice c = select_lambda_dbts(cfg, sc, 10, 0.3, 7, delta, [&](double) {
      ++calls;
      return DbtsProbe{1.0, 0.0};
    });
    CHECK(calls == cfg.j_max);
    CHECK(c.index == 7 + cfg.j_max);
    CHECK(c.fallback);
    CHECK(c.lambda == select_lambda_nesterov(cfg, sc, 10, 0.3, delta));
  }
}

TEST_CASE("iterate stops immediately on exact data at the initial guess") {
  const auto s = fixture::deconv(16);
  const Vec v0 = apply(s.fp, s.fp.u0);
  for (double delta : {0.0, 0.1})
    for (auto lam : {LambdaStrategy::zero, LambdaStrategy::nesterov, LambdaStrategy::dbts}) {
      const IterationTrace t = iterate(fixture::config(lam), s.pen, s.fp, v0, delta);
      CHECK(t.stop_index == 0);
      CHECK(t.stop_reason == StopReason::discrepancy);
      CHECK(t.steps.size() == 1);
      CHECK(t.solution() == s.fp.u0);
      CHECK(t.steps[0].residual_norm == 0.0);
    }
}

TEST_CASE("zero lambda and zero alpha reproduce the Landweber iteration") {
  const auto s = fixture::deconv(32);
  const double delta = 1e-3;
  const Vec vd = add_noise(s.v, delta, 3);
  SolverConfig cfg = fixture::config(LambdaStrategy::zero, AlphaStrategy::zero);
  cfg.k_max = 60;
  const IterationTrace t = iterate(cfg, s.pen, s.fp, vd, delta);
  REQUIRE(t.stop_reason == StopReason::k_max);

  const SpaceModel& U = s.pen.space();
  DualVec xi = s.fp.gamma0;
  Vec u = conjugate_grad(s.pen, xi);
  for (int k = 0; k < cfg.k_max; ++k) {
    const Vec r = apply(s.fp, u) - vd;
    const double rn = norm(s.fp.data, r);
    REQUIRE(t.steps[k].residual_norm == doctest::Approx(rn).epsilon(1e-12));
    const DualVec g = deriv_adjoint(s.fp, u, duality_map(s.fp.data, cfg.s, r));
    const double tk = norm(U, xi - s.fp.gamma0);
    const double th2 = tk > 0 ? cfg.theta2bar * rn * rn / (tk * tk) : 0.0;
    const double rad = cfg.theta1 * rn * rn - th2 * tk * tk;
    const double mu = std::min(0.5 * rad / std::pow(norm(U, g), 2.0), cfg.theta3);
    REQUIRE(t.steps[k].upsilon == doctest::Approx(mu).epsilon(1e-13));
    xi = xi - mu * g;
    u = conjugate_grad(s.pen, xi);
  }
  CHECK((t.solution() - u).coords().cwiseAbs().maxCoeff() <= 1e-9 * u.coords().cwiseAbs().maxCoeff());
}

TEST_CASE("invariants along runs for every strategy") {
  struct Case {
    const char* name;
    fixture::Setup setup;
    SolverConfig base;
    double delta;
  };
  SolverConfig p3;
  p3.theta1 = 0.05;
  p3.theta2bar = 0.025;
  std::vector<Case> cases;
  cases.push_back({"deconv quadratic-l1", fixture::deconv(Penalty::quadratic_l1(64, 0.5)), SolverConfig{}, 1e-2});
  cases.push_back({"diagexp p=2", fixture::diagexp(32), SolverConfig{}, 1e-3});
  cases.push_back({"diagexp p=3", fixture::diagexp(Penalty::power_norm(32, 3.0)), p3, 1e-2});
  for (auto& c : cases)
    for (auto lam : {LambdaStrategy::zero, LambdaStrategy::nesterov, LambdaStrategy::dbts}) {
      CAPTURE(c.name);
      CAPTURE(to_string(lam));
      SolverConfig cfg = c.base;
      cfg.lambda_strategy = lam;
      if (c.setup.pen.p() == 3.0 && lam == LambdaStrategy::nesterov) continue;  // no stop within k_max
      const IterationTrace t = fixture::run(c.setup, cfg, c.delta);
      CHECK(t.stop_reason == StopReason::discrepancy);
      CHECK(t.final_state.residual_norm <= cfg.tau * c.delta);
      CHECK(t.steps.size() == static_cast<std::size_t>(t.stop_index) + 1);
      const TheoryReport rep = audit(t, c.setup.pen, c.setup.fp, cfg, c.setup.fp.truth);
      CHECK(rep.violations.empty());
      CHECK(rep.max_theta_k <= 1e-10);
      CHECK(rep.sum_bound_slack >= 0.0);
      for (std::size_t k = 0; k < t.steps.size(); ++k) {
        const auto& r = t.steps[k];
        REQUIRE(r.k == static_cast<int>(k));
        if (r.upsilon == 0.0) REQUIRE(r.lambda == 0.0);
        REQUIRE(r.lambda >= 0.0);
        REQUIRE(r.lambda < 1.0);
        REQUIRE(r.alpha >= 0.0);
        REQUIRE(r.alpha <= 1.0);
      }
      const IterationState& st = t.final_state;
      CHECK(st.u_cur == conjugate_grad(c.setup.pen, st.gamma_cur));
      CHECK(st.w_cur == conjugate_grad(c.setup.pen, st.xi));
    }
}

TEST_CASE("DiagonalExp with DBTS stops at a finite index") {
  const auto s = fixture::diagexp(32);
  const IterationTrace t = fixture::run(s, fixture::config(LambdaStrategy::dbts), 1e-3);
  CHECK(t.stop_reason == StopReason::discrepancy);
  CHECK(t.final_state.residual_norm <= 5.0 * 1e-3);
}

TEST_CASE("noise-free summability monitors") {
  const auto s = fixture::deconv(64);
  for (auto lam : {LambdaStrategy::nesterov, LambdaStrategy::dbts}) {
    SolverConfig cfg = fixture::config(lam);
    cfg.k_max = 5000;
    const IterationTrace t = iterate(cfg, s.pen, s.fp, s.v, 0.0);
    REQUIRE(t.stop_reason == StopReason::k_max);
    REQUIRE(t.steps.size() == 5001);
    double prev_a = 0.0, prev_l = 0.0;
    for (const auto& r : t.steps) {
      REQUIRE(r.alpha_sum >= prev_a);
      REQUIRE(r.lambda_sum >= prev_l);
      REQUIRE(r.alpha <= cfg.alpha_summable_scale / ((r.k + 1.0) * (r.k + 1.0)));
      prev_a = r.alpha_sum;
      prev_l = r.lambda_sum;
    }
    const auto& last = t.steps.back();
    const auto& mid = t.steps[2500];
    CHECK(std::isfinite(last.alpha_sum));
    CHECK(std::isfinite(last.lambda_sum));
    // increments over the second half are a small share of the total
    CHECK(last.alpha_sum - mid.alpha_sum <= 0.01 * std::max(last.alpha_sum, 1e-300) + 1e-12);
    CHECK(last.lambda_sum - mid.lambda_sum <= 0.05 * std::max(last.lambda_sum, 1e-300) + 1e-12);
    const TheoryReport rep = audit(t, s.pen, s.fp, cfg, s.fp.truth);
    CHECK(rep.violations.empty());
  }
}

TEST_CASE("refused and failing runs") {
  auto s = fixture::diagexp(32);
  s.fp.eta = 0.95;
  const IterationTrace t = fixture::run(s, fixture::config(LambdaStrategy::dbts), 1e-2);
  CHECK(t.stop_reason == StopReason::theta5_violation);
  CHECK(t.steps.empty());
  CHECK(t.constants.theta5 < 0.0);

  struct Blowup : LinearDeconv {
    using LinearDeconv::LinearDeconv;
    Eigen::VectorXd deriv_adjoint(const Eigen::VectorXd&, const Eigen::VectorXd& xi) const override {
      return Eigen::VectorXd::Constant(xi.size(), std::numeric_limits<double>::infinity());
    }
  };
  const Penalty pen = Penalty::power_norm(8, 2.0);
  ForwardProblem fp = make_problem(std::make_shared<Blowup>(Eigen::MatrixXd::Identity(8, 8)),
                                   Vec(Eigen::VectorXd::Ones(8)));
  fp = calibrate(fp, pen, {});
  CHECK_THROWS_AS(iterate(SolverConfig{}, pen, fp, apply(fp, *fp.truth), 1e-3), NumericError);
}
