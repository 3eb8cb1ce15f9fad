#include "tpg/cli.hpp"

#include "tpg/experiment.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

namespace tpg {

namespace {

std::string output_dir(const ExperimentConfig& cfg, const std::string& flag) {
  if (const char* env = std::getenv("TPG_OUTPUT_DIR"); env && *env) return env;
  if (!flag.empty()) return flag;
  return cfg.output_dir;
}

void print_run(std::ostream& out, const RunOutcome& run) {
  const auto& t = run.trace;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "delta=%-9.3g k_delta=%-5d stop=%-12s residual=%.6e bregman=%.6e violations=%zu\n",
                t.noise_level, t.stop_index, to_string(t.stop_reason).c_str(),
                t.final_state.residual_norm,
                t.steps.empty() ? 0.0 : t.steps.back().bregman_to_truth, run.report.violations.size());
  out << buf;
  for (const auto& v : run.report.violations)
    out << "  k=" << v.k << " " << v.check << ": " << v.statement << " (value " << v.value
        << ", bound " << v.bound << ")\n";
}

int execute(const std::string& config_path, const std::string& out_flag, bool sweep_mode,
            std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  Experiment ex{Penalty::quadratic_l1(1, 0.0), {}, {}};
  try {
    cfg = load_config(config_path);
    if (sweep_mode && cfg.noise_levels.size() < 3)
      throw ConfigError("sweep needs at least 3 noise levels");
    ex = build_experiment(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const NumericError& e) {
    err << "numeric error during calibration: " << e.what() << '\n';
    return exit_numeric;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  }
  out << "problem=" << cfg.problem.kind << " n=" << cfg.problem.n
      << " penalty=" << to_string(ex.pen.kind()) << " p=" << ex.pen.p() << " c0=" << ex.pen.c0()
      << " eps=" << ex.fp.eps << " eta=" << ex.fp.eta << " C=" << ex.fp.c_stab
      << " C0=" << ex.fp.deriv_bound << " theta5=" << theta5(cfg.solver, ex.pen, ex.fp) << '\n';

  ExperimentResult res;
  try {
    res = run_experiment(ex, cfg);
  } catch (const Theta5Error& e) {
    err << "refused: " << e.what() << '\n';
    return exit_theta5;
  } catch (const NumericError& e) {
    err << "numeric blowup: " << e.what() << '\n';
    return exit_numeric;
  }
  const std::string dir = output_dir(cfg, out_flag);
  try {
    write_outputs(res, ex, cfg, dir);
  } catch (const std::exception& e) {
    err << "cannot write outputs: " << e.what() << '\n';
    return exit_config;
  }
  bool violated = false;
  for (const auto& run : res.runs) {
    print_run(out, run);
    violated = violated || !run.report.ok();
  }
  if (res.sweep) out << format_sweep(*res.sweep);
  out << "outputs written to " << dir << '\n';
  if (sweep_mode && res.sweep && !res.sweep->trend_ok) violated = true;
  return violated ? exit_violation : exit_ok;
}

int audit_dir(const std::string& dir, std::ostream& out, std::ostream& err) {
  std::vector<TheoryReport> reports;
  try {
    reports = audit_directory(dir);
  } catch (const std::exception& e) {
    err << "cannot audit " << dir << ": " << e.what() << '\n';
    return exit_config;
  }
  bool violated = false;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << "run " << i << ": theta5=" << r.theta5 << " monotone_violations=" << r.monotone_violations
        << " max_theta_k=" << r.max_theta_k << " sum_bound_slack=" << r.sum_bound_slack
        << " ball_violations=" << r.ball_violations
        << " admissibility_violations=" << r.admissibility_violations
        << " initial_guess=" << (r.initial_guess_check ? "ok" : "fail") << '\n';
    for (const auto& v : r.violations)
      out << "  k=" << v.k << " " << v.check << ": " << v.statement << '\n';
    violated = violated || !r.ok();
  }
  return violated ? exit_violation : exit_ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-point gradient regularization experiments"};
  app.require_subcommand(1);
  std::string config_path, out_flag, trace_dir;

  auto* run = app.add_subcommand("run", "run every noise level of a config and audit the traces");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--out", out_flag, "output directory (TPG_OUTPUT_DIR takes precedence)");

  auto* sweep = app.add_subcommand("sweep", "run a noise sweep and check the error trend");
  sweep->add_option("config", config_path, "experiment config file")->required();
  sweep->add_option("--out", out_flag, "output directory (TPG_OUTPUT_DIR takes precedence)");

  auto* aud = app.add_subcommand("audit", "re-audit traces written by run or sweep");
  aud->add_option("trace-dir", trace_dir, "directory holding summary.json and trace files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return exit_config;
  }
  if (run->parsed()) return execute(config_path, out_flag, false, out, err);
  if (sweep->parsed()) return execute(config_path, out_flag, true, out, err);
  return audit_dir(trace_dir, out, err);
}

}  // namespace tpg
