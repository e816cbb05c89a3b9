#include "react/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace react::cli;
  CLI::App app{"Formation navigation simulator and benchmarks"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  RunOptions run;
  std::uint64_t run_seed = 0;
  double run_hz = 0.0;
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write trace, events and manifest");
  run_cmd->add_option("--scenario", run.scenario, "Scenario JSON or a previous run's manifest.json")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  auto* run_seed_opt = run_cmd->add_option("--seed", run_seed, "Override the scenario seed");
  auto* run_hz_opt = run_cmd->add_option("--hz", run_hz, "Override the replanning rate");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench-assign", "Time the four-to-two column transition assignment");
  bench_cmd->add_option("--sizes", bench.sizes, "Comma-separated team sizes")->delimiter(',');
  bench_cmd->add_option("--reps", bench.reps, "Repetitions per size (median is reported)");
  bench_cmd->add_option("--out", bench.out, "Output directory")->required();
  bool cold_start = false;
  bench_cmd->add_flag("--cold-start", cold_start, "Search the horizon from 0 instead of the assignment lower bound");

  AblateOptions ablate;
  std::uint64_t ablate_seed = 0;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare full and spatial-only planning on one scenario");
  ablate_cmd->add_option("--scenario", ablate.scenario, "Scenario JSON")->required();
  ablate_cmd->add_option("--out", ablate.out, "Output directory")->required();
  auto* ablate_seed_opt = ablate_cmd->add_option("--seed", ablate_seed, "Override the scenario seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    configure_logging();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }

  if (*run_cmd) {
    if (*run_seed_opt) run.seed = run_seed;
    if (*run_hz_opt) run.hz = run_hz;
    return cmd_run(run);
  }
  if (*bench_cmd) {
    bench.warm_start = !cold_start;
    return cmd_bench_assign(bench);
  }
  if (*ablate_seed_opt) ablate.seed = ablate_seed;
  return cmd_ablate(ablate);
}
