#include "tpg/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

namespace tpg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double to_double(const std::string& key, const std::string& s) {
  const char* b = s.c_str();
  char* e = nullptr;
  const double v = std::strtod(b, &e);
  if (s.empty() || e != b + s.size() || !std::isfinite(v))
    throw ConfigError("'" + key + "' expects a finite number, got '" + s + "'");
  return v;
}

long to_long(const std::string& key, const std::string& s) {
  const char* b = s.c_str();
  char* e = nullptr;
  const long v = std::strtol(b, &e, 10);
  if (s.empty() || e != b + s.size()) throw ConfigError("'" + key + "' expects an integer, got '" + s + "'");
  return v;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::vector<std::string>&)>;

template <class F>
Setter scalar(F f) {
  return [f](ExperimentConfig& c, const std::string& key, const std::vector<std::string>& in) {
    if (in.size() != 1) throw ConfigError("'" + key + "' expects a single value");
    f(c, key, in.front());
  };
}

Setter real(double& (*get)(ExperimentConfig&)) {
  return scalar([get](ExperimentConfig& c, const std::string& k, const std::string& v) {
    get(c) = to_double(k, v);
  });
}

const std::map<std::string, Setter>& schema() {
  static const std::map<std::string, Setter> m = {
      {"problem.kind", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v != "deconv" && v != "diagexp") throw ConfigError("'" + k + "' must be deconv or diagexp");
         c.problem.kind = v;
       })},
      {"problem.n", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.problem.n = to_long(k, v);
       })},
      {"problem.kernel_width", real([](ExperimentConfig& c) -> double& { return c.problem.kernel_width; })},
      {"problem.amplitude", real([](ExperimentConfig& c) -> double& { return c.problem.amplitude; })},
      {"problem.sigma_max", real([](ExperimentConfig& c) -> double& { return c.problem.sigma_max; })},
      {"problem.decay", real([](ExperimentConfig& c) -> double& { return c.problem.decay; })},
      {"problem.eps", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.problem.calibration.eps = to_double(k, v);
       })},
      {"problem.eta", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.problem.calibration.eta = to_double(k, v);
       })},
      {"problem.c_stab", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.problem.calibration.c_stab = to_double(k, v);
       })},
      {"problem.deriv_bound", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.problem.calibration.deriv_bound = to_double(k, v);
       })},
      {"problem.calibration_samples",
       scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const long n = to_long(k, v);
         if (n < 100) throw ConfigError("'" + k + "' must be >= 100");
         c.problem.calibration.samples = static_cast<std::size_t>(n);
       })},
      {"problem.calibration_seed", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.problem.calibration.seed = static_cast<std::uint64_t>(to_long(k, v));
       })},
      {"penalty.kind", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "power-norm")
           c.penalty.kind = PenaltyKind::power_norm;
         else if (v == "quadratic-l1")
           c.penalty.kind = PenaltyKind::quadratic_l1;
         else
           throw ConfigError("'" + k + "' must be power-norm or quadratic-l1");
       })},
      {"penalty.p", real([](ExperimentConfig& c) -> double& { return c.penalty.p; })},
      {"penalty.beta", real([](ExperimentConfig& c) -> double& { return c.penalty.beta; })},
      {"penalty.c0", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.penalty.c0 = to_double(k, v);
       })},
      {"space.r_u", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const double r = to_double(k, v);
         if (r != c.penalty.p && !(c.penalty.kind == PenaltyKind::quadratic_l1 && r == 2.0))
           throw ConfigError("'" + k + "' must equal the penalty exponent p");
       })},
      {"space.r_v", real([](ExperimentConfig& c) -> double& { return c.r_v; })},
      {"space.s", real([](ExperimentConfig& c) -> double& { return c.solver.s; })},
      {"solver.tau", real([](ExperimentConfig& c) -> double& { return c.solver.tau; })},
      {"solver.theta1", real([](ExperimentConfig& c) -> double& { return c.solver.theta1; })},
      {"solver.theta2bar", real([](ExperimentConfig& c) -> double& { return c.solver.theta2bar; })},
      {"solver.theta3", real([](ExperimentConfig& c) -> double& { return c.solver.theta3; })},
      {"solver.theta4", real([](ExperimentConfig& c) -> double& { return c.solver.theta4; })},
      {"solver.zeta", real([](ExperimentConfig& c) -> double& { return c.solver.zeta; })},
      {"solver.sigma_nesterov", real([](ExperimentConfig& c) -> double& { return c.solver.sigma_nesterov; })},
      {"solver.h_scale", real([](ExperimentConfig& c) -> double& { return c.solver.h_scale; })},
      {"solver.alpha_summable_scale",
       real([](ExperimentConfig& c) -> double& { return c.solver.alpha_summable_scale; })},
      {"solver.k_max", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.solver.k_max = static_cast<int>(to_long(k, v));
       })},
      {"solver.j_max", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.solver.j_max = static_cast<int>(to_long(k, v));
       })},
      {"solver.lambda", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "zero")
           c.solver.lambda_strategy = LambdaStrategy::zero;
         else if (v == "nesterov")
           c.solver.lambda_strategy = LambdaStrategy::nesterov;
         else if (v == "dbts")
           c.solver.lambda_strategy = LambdaStrategy::dbts;
         else
           throw ConfigError("'" + k + "' must be zero, nesterov or dbts");
       })},
      {"solver.alpha", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "zero")
           c.solver.alpha_strategy = AlphaStrategy::zero;
         else if (v == "rule")
           c.solver.alpha_strategy = AlphaStrategy::rule;
         else
           throw ConfigError("'" + k + "' must be zero or rule");
       })},
      {"experiment.noise",
       [](ExperimentConfig& c, const std::string& k, const std::vector<std::string>& in) {
         c.noise_levels.clear();
         for (const auto& s : in) {
           const double d = to_double(k, s);
           if (d < 0.0) throw ConfigError("noise levels must be >= 0");
           c.noise_levels.push_back(d);
         }
       }},
      {"experiment.seed", scalar([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(to_long(k, v));
       })},
      {"experiment.output", scalar([](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.output_dir = v;
       })},
  };
  return m;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.noise_levels = {1e-1, 1e-2, 1e-3};
  // penalty settings first so that checks on space.r_u see the final p
  std::stable_partition(items.begin(), items.end(), [](const CLI::ConfigItem& it) {
    return it.parents.size() == 1 && it.parents[0] == "penalty";
  });
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    std::string key;
    for (const auto& p : it.parents) key += p + ".";
    key += it.name;
    const auto f = schema().find(key);
    if (f == schema().end()) throw ConfigError("unknown or malformed entry '" + key + "'");
    if (it.inputs.empty()) throw ConfigError("'" + key + "' has no value");
    f->second(cfg, key, it.inputs);
  }
  if (cfg.noise_levels.empty()) throw ConfigError("at least one noise level is required");
  if (cfg.problem.n < 1) throw ConfigError("problem.n must be positive");
  if (!(cfg.r_v > 1.0)) throw ConfigError("space.r_v must be > 1");
  if (cfg.penalty.kind == PenaltyKind::quadratic_l1 && cfg.penalty.p != 2.0)
    throw ConfigError("quadratic-l1 penalty has p = 2");
  if (cfg.penalty.kind == PenaltyKind::power_norm && !(cfg.penalty.p >= 2.0))
    throw ConfigError("power-norm penalty needs p >= 2");
  try {
    cfg.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  cfg.problem.calibration.data_r = cfg.r_v;
  return cfg;
}

Vec add_noise(const Vec& v, double delta, std::uint64_t seed, double r_v) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("noise level must be >= 0");
  if (delta == 0.0) return v;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(v.size());
  double nx = 0.0;
  while (nx == 0.0) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
    nx = lr_norm(xi, r_v);
  }
  return v + Vec(xi * (delta / nx));
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  const auto& ps = cfg.problem;
  ForwardProblem fp = ps.kind == "deconv" ? make_deconv(ps.n, ps.kernel_width, ps.amplitude)
                                          : make_diagexp(ps.n, ps.sigma_max, ps.decay, ps.amplitude);
  Penalty pen = cfg.penalty.kind == PenaltyKind::power_norm
                    ? Penalty::power_norm(ps.n, cfg.penalty.p, cfg.penalty.c0)
                    : Penalty::quadratic_l1(ps.n, cfg.penalty.beta);
  CalibrationOptions opts = ps.calibration;
  opts.data_r = cfg.r_v;
  fp = calibrate(std::move(fp), pen, opts);
  Vec v = apply(fp, *fp.truth);
  return {std::move(pen), std::move(fp), std::move(v)};
}

ExperimentResult run_experiment(const Experiment& ex, const ExperimentConfig& cfg) {
  for (double delta : cfg.noise_levels) {
    const SchemeConstants sc = scheme_constants(cfg.solver, ex.pen, ex.fp, delta);
    if (!(sc.gate > 0.0)) {
      const Theta5Terms t = theta5_terms(cfg.solver, ex.pen, ex.fp);
      std::ostringstream os;
      os.precision(6);
      os << (delta == 0.0 ? "theta5 without the tau term" : "theta5") << " = " << sc.gate
         << " <= 0; largest subtracted term: " << t.dominant() << " [convexity=" << t.convexity
         << ", eta=" << t.eta << ", step=" << t.step << ", discrepancy=" << t.discrepancy << "]";
      throw Theta5Error(os.str());
    }
  }
  ExperimentResult res;
  for (double delta : cfg.noise_levels) {
    const Vec vd = add_noise(ex.v_exact, delta, cfg.seed, cfg.r_v);
    RunOutcome run;
    run.trace = iterate(cfg.solver, ex.pen, ex.fp, vd, delta);
    run.report = audit(run.trace, ex.pen, ex.fp, cfg.solver, ex.fp.truth);
    res.runs.push_back(std::move(run));
  }
  if (res.runs.size() >= 3) {
    std::vector<IterationTrace> traces;
    for (const auto& r : res.runs) traces.push_back(r.trace);
    const auto* lin = dynamic_cast<const LinearDeconv*>(ex.fp.op.get());
    if (lin && numerically_rank_deficient(lin->matrix())) {
      res.sweep_uses_projection = true;
      res.sweep = delta_sweep_report(traces, ex.pen, [&](const IterationTrace& t) {
        return solution_set_projection(lin->matrix(), ex.v_exact, t.solution());
      });
    } else {
      res.sweep = delta_sweep_report(traces, ex.pen, *ex.fp.truth);
    }
  }
  return res;
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double cell_double(const std::string& s) {
  char* e = nullptr;
  const double v = std::strtod(s.c_str(), &e);
  if (e == s.c_str()) throw std::runtime_error("bad number '" + s + "' in trace file");
  return v;
}

json report_json(const TheoryReport& r) {
  json j;
  j["theta5"] = r.theta5;
  j["has_truth"] = r.has_truth;
  j["monotone_violations"] = r.monotone_violations;
  j["max_theta_k"] = r.max_theta_k;
  j["sum_bound_budget"] = r.sum_bound_budget;
  j["sum_bound_slack"] = r.sum_bound_slack;
  j["ball_violations"] = r.ball_violations;
  j["admissibility_violations"] = r.admissibility_violations;
  j["dbts_index_violations"] = r.dbts_index_violations;
  j["summability_partials"] = {r.alpha_partial, r.lambda_partial};
  j["initial_guess_check"] = r.initial_guess_check;
  j["violations"] = json::array();
  for (const auto& v : r.violations)
    j["violations"].push_back(
        {{"k", v.k}, {"check", v.check}, {"statement", v.statement}, {"value", v.value}, {"bound", v.bound}});
  return j;
}

}  // namespace

void write_trace_csv(const IterationTrace& trace, const std::string& path) {
  auto out = open_out(path);
  out << "k,residual_norm,upsilon,lambda,alpha,t_k,bregman_to_truth,theta_k\n";
  for (const auto& r : trace.steps)
    out << r.k << ',' << fmt(r.residual_norm) << ',' << fmt(r.upsilon) << ',' << fmt(r.lambda) << ','
        << fmt(r.alpha) << ',' << fmt(r.t_k) << ',' << fmt(r.bregman_to_truth) << ','
        << fmt(r.theta_k) << '\n';
}

void write_monitor_csv(const IterationTrace& trace, const std::string& path) {
  auto out = open_out(path);
  out << "k,theta2_k,u_dist,w_dist,dgamma_norm,gamma0_dist,dbts_index,adm_step,adm_ball,step_sum,"
         "alpha_sum,lambda_sum\n";
  for (const auto& r : trace.steps)
    out << r.k << ',' << fmt(r.theta2_k) << ',' << fmt(r.u_dist) << ',' << fmt(r.w_dist) << ','
        << fmt(r.dgamma_norm) << ',' << fmt(r.gamma0_dist) << ',' << r.dbts_index << ','
        << int(r.adm_step) << ',' << int(r.adm_ball) << ',' << fmt(r.step_sum) << ','
        << fmt(r.alpha_sum) << ',' << fmt(r.lambda_sum) << '\n';
}

void write_outputs(const ExperimentResult& res, const Experiment& ex, const ExperimentConfig& cfg,
                   const std::string& dir) {
  fs::create_directories(dir);
  json summary;
  summary["problem"] = {{"kind", cfg.problem.kind},
                        {"n", cfg.problem.n},
                        {"eps", ex.fp.eps},
                        {"eta", ex.fp.eta},
                        {"c_stab", ex.fp.c_stab},
                        {"deriv_bound", ex.fp.deriv_bound}};
  summary["penalty"] = {{"kind", to_string(ex.pen.kind())},
                        {"p", ex.pen.p()},
                        {"c0", ex.pen.c0()},
                        {"beta", ex.pen.beta()}};
  const auto& s = cfg.solver;
  summary["solver"] = {{"tau", s.tau},       {"s", s.s},
                       {"theta1", s.theta1}, {"theta2bar", s.theta2bar},
                       {"theta3", s.theta3}, {"theta4", s.theta4},
                       {"zeta", s.zeta},     {"sigma_nesterov", s.sigma_nesterov},
                       {"lambda", to_string(s.lambda_strategy)},
                       {"alpha", to_string(s.alpha_strategy)},
                       {"k_max", s.k_max},   {"j_max", s.j_max},
                       {"h_scale", s.h_scale}, {"alpha_summable_scale", s.alpha_summable_scale},
                       {"r_v", cfg.r_v}};
  summary["seed"] = cfg.seed;
  json d0 = nullptr;
  if (ex.fp.truth) d0 = bregman_distance(ex.pen, *ex.fp.truth, ex.fp.u0, ex.fp.gamma0);
  summary["runs"] = json::array();
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const auto& run = res.runs[i];
    const std::string tag = std::to_string(i);
    write_trace_csv(run.trace, (fs::path(dir) / ("trace_" + tag + ".csv")).string());
    write_monitor_csv(run.trace, (fs::path(dir) / ("monitors_" + tag + ".csv")).string());
    const auto& sc = run.trace.constants;
    json r;
    r["delta"] = run.trace.noise_level;
    r["trace_file"] = "trace_" + tag + ".csv";
    r["monitor_file"] = "monitors_" + tag + ".csv";
    r["k_delta"] = run.trace.stop_index;
    r["stop_reason"] = to_string(run.trace.stop_reason);
    r["final_residual"] = run.trace.final_state.residual_norm;
    r["theta5"] = sc.theta5;
    r["kappa_h"] = sc.kappa_h;
    r["theta6_noisefree"] = sc.theta6_noisefree;
    r["lambda_strategy"] = to_string(run.trace.lambda_strategy);
    r["audit_inputs"] = {{"gate", sc.gate}, {"zeta", sc.zeta}, {"s", sc.s},
                         {"p", sc.p},       {"c0", sc.c0},     {"eps", sc.eps},
                         {"j_max", s.j_max}};
    r["audit_inputs"]["initial_bregman"] = d0;
    r["report"] = report_json(run.report);
    summary["runs"].push_back(r);
  }
  if (res.sweep) {
    json sw;
    sw["reference"] = res.sweep_uses_projection ? "solution-set projection" : "truth";
    sw["trend_ok"] = res.sweep->trend_ok;
    sw["notes"] = res.sweep->notes;
    sw["rows"] = json::array();
    for (const auto& row : res.sweep->rows)
      sw["rows"].push_back({{"delta", row.delta},
                            {"k_delta", row.k_delta},
                            {"stop_reason", to_string(row.stop_reason)},
                            {"residual_norm", row.residual_norm},
                            {"bregman", row.bregman},
                            {"error", row.error}});
    summary["sweep"] = sw;
  }
  auto out = open_out((fs::path(dir) / "summary.json").string());
  out << summary.dump(2) << '\n';
}

std::vector<TheoryReport> audit_directory(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "summary.json");
  if (!in) throw std::runtime_error("no summary.json in " + dir);
  const json summary = json::parse(in);
  std::vector<TheoryReport> reports;
  for (const auto& r : summary.at("runs")) {
    IterationTrace trace;
    trace.noise_level = r.at("delta").get<double>();
    trace.stop_index = r.at("k_delta").get<int>();
    const std::string reason = r.at("stop_reason").get<std::string>();
    trace.stop_reason = reason == "discrepancy" ? StopReason::discrepancy
                        : reason == "k_max"     ? StopReason::k_max
                                                : StopReason::theta5_violation;
    const std::string lam = r.at("lambda_strategy").get<std::string>();
    trace.lambda_strategy = lam == "dbts"       ? LambdaStrategy::dbts
                            : lam == "nesterov" ? LambdaStrategy::nesterov
                                                : LambdaStrategy::zero;
    const auto rows = read_csv((fs::path(dir) / r.at("trace_file").get<std::string>()).string());
    const auto mons = read_csv((fs::path(dir) / r.at("monitor_file").get<std::string>()).string());
    if (rows.size() != mons.size() || rows.empty()) throw std::runtime_error("trace files disagree");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& a = rows[i];
      const auto& m = mons[i];
      if (a.size() != 8 || m.size() != 12) throw std::runtime_error("malformed trace row");
      StepRecord rec;
      rec.k = static_cast<int>(cell_double(a[0]));
      rec.residual_norm = cell_double(a[1]);
      rec.upsilon = cell_double(a[2]);
      rec.lambda = cell_double(a[3]);
      rec.alpha = cell_double(a[4]);
      rec.t_k = cell_double(a[5]);
      rec.bregman_to_truth = cell_double(a[6]);
      rec.theta_k = cell_double(a[7]);
      rec.theta2_k = cell_double(m[1]);
      rec.u_dist = cell_double(m[2]);
      rec.w_dist = cell_double(m[3]);
      rec.dgamma_norm = cell_double(m[4]);
      rec.gamma0_dist = cell_double(m[5]);
      rec.dbts_index = static_cast<long>(cell_double(m[6]));
      rec.adm_step = m[7] == "1";
      rec.adm_ball = m[8] == "1";
      rec.step_sum = cell_double(m[9]);
      rec.alpha_sum = cell_double(m[10]);
      rec.lambda_sum = cell_double(m[11]);
      trace.steps.push_back(rec);
    }
    const auto& ai = r.at("audit_inputs");
    AuditInputs inputs;
    inputs.gate = ai.at("gate").get<double>();
    inputs.zeta = ai.at("zeta").get<double>();
    inputs.s = ai.at("s").get<double>();
    inputs.p = ai.at("p").get<double>();
    inputs.c0 = ai.at("c0").get<double>();
    inputs.eps = ai.at("eps").get<double>();
    inputs.j_max = ai.at("j_max").get<int>();
    if (!ai.at("initial_bregman").is_null()) inputs.initial_bregman = ai.at("initial_bregman").get<double>();
    reports.push_back(audit(trace, inputs));
  }
  return reports;
}

std::string format_sweep(const SweepTable& table) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %7s %-12s %13s %13s %13s\n", "delta", "k_delta", "stop",
                "residual", "bregman", "error");
  os << buf;
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%-10.3g %7d %-12s %13.6e %13.6e %13.6e\n", r.delta, r.k_delta,
                  to_string(r.stop_reason).c_str(), r.residual_norm, r.bregman, r.error);
    os << buf;
  }
  os << "trend: " << (table.trend_ok ? "non-increasing" : "VIOLATED") << '\n';
  for (const auto& n : table.notes) os << "  " << n << '\n';
  return os.str();
}

}  // namespace tpg
