#pragma once

#include "tpg/diagnostics.hpp"
#include "tpg/operators.hpp"
#include "tpg/penalty.hpp"
#include "tpg/solver.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tpg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemSpec {
  std::string kind = "deconv";  // deconv | diagexp
  long n = 64;
  double kernel_width = 0.03;
  double amplitude = 10.0;
  double sigma_max = 10.0;
  double decay = 2.0;
  CalibrationOptions calibration;
};

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::power_norm;
  double p = 2.0;
  double beta = 0.0;
  std::optional<double> c0;
};

struct ExperimentConfig {
  ProblemSpec problem;
  PenaltySpec penalty;
  double r_v = 2.0;
  SolverConfig solver;
  std::vector<double> noise_levels;
  std::uint64_t seed = 7;
  std::string output_dir = "tpg_out";
};

// key = value document with [problem] [penalty] [space] [solver] [experiment] sections.
ExperimentConfig load_config(const std::string& path);

Vec add_noise(const Vec& v, double delta, std::uint64_t seed, double r_v = 2.0);

struct Experiment {
  Penalty pen;
  ForwardProblem fp;
  Vec v_exact;
};

Experiment build_experiment(const ExperimentConfig& cfg);

struct RunOutcome {
  IterationTrace trace;
  TheoryReport report;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::optional<SweepTable> sweep;
  bool sweep_uses_projection = false;
};

// Runs every noise level. Throws Theta5Error before iterating when the constants are inadmissible.
ExperimentResult run_experiment(const Experiment& ex, const ExperimentConfig& cfg);

class Theta5Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_trace_csv(const IterationTrace& trace, const std::string& path);
void write_monitor_csv(const IterationTrace& trace, const std::string& path);
void write_outputs(const ExperimentResult& res, const Experiment& ex, const ExperimentConfig& cfg,
                   const std::string& dir);

// Rebuilds runs from a directory written by write_outputs and audits them again.
std::vector<TheoryReport> audit_directory(const std::string& dir);

std::string format_sweep(const SweepTable& table);

}  // namespace tpg
