#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "resprob/qos.hpp"
#include "resprob/solvers.hpp"

namespace resprob {

enum class RunMode { Analyze, Simulate, Optimize };

std::string to_token(RunMode mode);

struct BudgetSweep {
  usec_t lo = 0, hi = 0, step = 0;  // inclusive endpoints
};

struct PmfSource {
  enum class Kind { Beta, File, Trace };
  Kind kind = Kind::Beta;
  double alpha = 0.0, beta = 0.0;
  usec_t support_max = 0, grid = 1;
  std::string path;
};

struct TaskConfig {
  std::string name;
  usec_t period = 0;
  usec_t server_period = 0;
  usec_t deadline = 0;  // 0: defaults to period
  std::optional<usec_t> budget;
  std::optional<BudgetSweep> budget_sweep;
  std::optional<std::vector<usec_t>> delta_divisors;  // delta = budget / k
  PmfSource pmf;
  std::optional<DeltaPolicy> delta;  // overrides the per-solver defaults
  std::optional<SolverKind> solver;
  QualityModel quality;
  double quality_floor = -std::numeric_limits<double>::infinity();
  double truncate_below = 0.0;
  int line = 0;
};

struct RunConfig {
  std::optional<RunMode> mode;
  std::vector<TaskConfig> tasks;
  double b_total = 1.0;
  SolverKind solver = SolverKind::Companion;
  usec_t budget_resolution = 1000;
  usec_t exact_delta = 50;
  std::int64_t jobs = 100000;
  std::optional<std::int64_t> warmup;
  std::uint64_t seed = 1;
  int verbosity = 0;
  std::string out_path, csv_path;

  std::int64_t warmup_or_default() const { return warmup ? *warmup : jobs / 10; }
};

// Parses and validates; every diagnostic carries file:line and the offending
// key. The mode-dependent checks run again in run() once the mode is final.
RunConfig parse_config(const std::string& text, const std::string& filename);
RunConfig load_config(const std::string& path);

// Cross-field validation for the given mode (budget presence, divisibility,
// quality model sanity). Throws ConfigError.
void validate_for_mode(const RunConfig& config, RunMode mode);

// Materializes the distribution of one task (file paths are resolved
// relative to the configuration file's directory).
Pmf load_pmf(const TaskConfig& task, const std::string& config_dir);

TaskSpec make_task_spec(const TaskConfig& task, const std::string& config_dir);

}  // namespace resprob
