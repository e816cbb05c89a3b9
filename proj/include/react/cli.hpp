#pragma once

#include "react/sim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace react::cli {

/// Process exit codes shared by every command.
enum ExitCode : int {
  kOk = 0,
  /// A collision occurred in a simulated run.
  kSafetyViolation = 1,
  /// Bad arguments, unreadable or invalid scenario.
  kUsageError = 2,
  /// Anything else, e.g. an output file that cannot be written.
  kInternalError = 3,
};

const char* version();

/// Reads REACT_LOG (trace, debug, info, warn, error, critical, off) and routes
/// spdlog to stderr. Unset means warn. Throws InvalidArgument on other values.
void configure_logging();

struct RunOptions {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> hz;
};

struct BenchOptions {
  std::vector<int> sizes{8, 16, 24, 30};
  int reps = 20;
  std::string out;
  double cell_size = 0.3;
  /// Start the horizon search at the assignment lower bound instead of 0.
  bool warm_start = true;
};

struct AblateOptions {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunOptions& options);
int cmd_bench_assign(const BenchOptions& options);
int cmd_ablate(const AblateOptions& options);

/// Scenario from disk with the command-line overrides applied.
sim::Scenario resolve_scenario(const std::string& path, std::optional<std::uint64_t> seed, std::optional<double> hz);

/// Everything needed to reproduce a run; written before the run starts.
io::Json manifest_json(const std::string& command, const std::string& scenario_path, const std::string& out_dir,
                       const sim::Scenario& scenario);

struct BenchRow {
  int n_robots = 0;
  int grid_w = 0;
  int grid_h = 0;
  int makespan = 0;
  std::int64_t cost = 0;
  double runtime_us = 0.0;
};

/// Four-column to two-column transition of n robots, solved `reps` times;
/// runtime is the median wall time of solve_assignment.
BenchRow bench_transition(int n_robots, int reps, double cell_size, bool warm_start = true);

/// Least-squares slope of log(runtime) against log(n).
double loglog_slope(const std::vector<BenchRow>& rows);

struct AblationResult {
  sim::RunResult full;
  sim::RunResult spatial;
  double fe_max_full = 0.0;
  double fe_max_spatial = 0.0;
  /// (spatial - full) / spatial, in percent; 0 when both are 0.
  double reduction_percent = 0.0;
};

/// Runs the scenario with and without time optimisation, same seed.
AblationResult run_ablation(const sim::Scenario& scenario);

}  // namespace react::cli
