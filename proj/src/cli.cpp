#include "react/cli.hpp"

#include "react/formation.hpp"
#include "react/tcf_r2t.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifndef REACT_VERSION
#define REACT_VERSION "0.0.0"
#endif

namespace react::cli {

namespace fs = std::filesystem;
using io::Json;

const char* version() { return REACT_VERSION; }

void configure_logging() {
  const char* env = std::getenv("REACT_LOG");
  const std::string value = env == nullptr || *env == '\0' ? "warn" : env;
  const auto level = spdlog::level::from_str(value);
  // from_str maps unknown names to off; only accept an explicit "off".
  if (level == spdlog::level::off && value != "off") {
    throw InvalidArgument("REACT_LOG: unknown level '" + value + "'");
  }
  if (spdlog::get("react") == nullptr) spdlog::set_default_logger(spdlog::stderr_color_mt("react"));
  spdlog::set_level(level);
}

sim::Scenario resolve_scenario(const std::string& path, std::optional<std::uint64_t> seed, std::optional<double> hz) {
  sim::Scenario s = sim::load_scenario(path);
  if (seed) s.seed = *seed;
  if (hz) {
    if (!(*hz > 0.0) || !std::isfinite(*hz)) throw io::SchemaError("--hz", "must be positive");
    s.planner.replan_hz = *hz;
    s.dt = 0.0;
  }
  s.validate();
  return s;
}

Json manifest_json(const std::string& command, const std::string& scenario_path, const std::string& out_dir,
                   const sim::Scenario& scenario) {
  return {{"tool", "react"},
          {"version", version()},
          {"command", command},
          {"scenario_path", scenario_path},
          {"output_dir", out_dir},
          {"seed", scenario.seed},
          {"resolved_scenario", sim::scenario_to_json(scenario)}};
}

namespace {

void write_json(const fs::path& path, const Json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

void prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw io::SchemaError("--out", "cannot create directory " + dir);
}

Json timings_json(const sim::RunResult& result, double wall_s) {
  Json transitions = Json::array();
  for (const auto& tr : result.metrics.transitions) transitions.push_back({{"t", tr.t}, {"runtime_us", tr.runtime_us}});
  return {{"wall_s", wall_s}, {"transitions", transitions}};
}

// Shared by run and ablate: writes one run's outputs into dir.
void write_run_outputs(const fs::path& dir, const sim::Scenario& scenario, const sim::RunResult& result, double wall_s) {
  sim::write_trace_csv(result.metrics, (dir / "trace.csv").string());
  sim::write_planner_csv(result.metrics, (dir / "planner.csv").string());
  write_json(dir / "events.json", sim::events_json(result.final_state, result.metrics));
  write_json(dir / "summary.json", sim::summary_json(scenario, result));
  write_json(dir / "timings.json", timings_json(result, wall_s));
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const io::SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int cmd_run(const RunOptions& options) {
  return guarded([&] {
    const sim::Scenario scenario = resolve_scenario(options.scenario, options.seed, options.hz);
    prepare_dir(options.out);
    const fs::path dir(options.out);
    write_json(dir / "manifest.json", manifest_json("run", options.scenario, options.out, scenario));
    spdlog::info("running {} ({} robots, {:.1f} s, seed {})", scenario.name, scenario.n_robots, scenario.duration,
                 scenario.seed);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = sim::run_scenario(scenario);
    write_run_outputs(dir, scenario, result, seconds_since(t0));
    if (result.metrics.collisions > 0) {
      std::cerr << "safety violation: " << result.metrics.collisions << " collision samples\n";
      return int{kSafetyViolation};
    }
    return int{kOk};
  });
}

BenchRow bench_transition(int n_robots, int reps, double cell_size, bool warm_start) {
  if (n_robots < 1) throw InvalidArgument("benchmark size must be at least 1");
  if (reps < 1) throw InvalidArgument("repetitions must be at least 1");
  const formation::StructureParams params;
  const auto from = formation::structure_with_columns(n_robots, std::min(4, n_robots), params);
  const auto to = formation::structure_with_columns(n_robots, std::min(2, n_robots), params);
  assign::AssignmentOptions options;
  options.warm_start = warm_start;
  std::vector<double> times;
  assign::AssignmentResult result;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    result = assign::solve_assignment(from.relative_positions, to.relative_positions, cell_size, options);
    times.push_back(seconds_since(t0) * 1e6);
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  const double median = times.size() % 2 == 1 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
  return {n_robots, result.problem.grid_width, result.problem.grid_height, result.makespan, result.total_cost, median};
}

double loglog_slope(const std::vector<BenchRow>& rows) {
  if (rows.size() < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = std::log(static_cast<double>(r.n_robots));
    const double y = std::log(std::max(r.runtime_us, 1e-3));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

int cmd_bench_assign(const BenchOptions& options) {
  return guarded([&] {
    if (options.sizes.empty()) throw InvalidArgument("--sizes: at least one size required");
    for (const int n : options.sizes) {
      if (n < 1) throw InvalidArgument("--sizes: sizes must be at least 1");
    }
    if (options.reps < 1) throw InvalidArgument("--reps: must be at least 1");
    if (!(options.cell_size > 0.0)) throw InvalidArgument("cell size must be positive");
    prepare_dir(options.out);
    const fs::path dir(options.out);
    std::vector<BenchRow> rows;
    for (const int n : options.sizes) {
      rows.push_back(bench_transition(n, options.reps, options.cell_size, options.warm_start));
      spdlog::info("n={} makespan {} cost {} median {:.1f} us", n, rows.back().makespan, rows.back().cost,
                   rows.back().runtime_us);
    }
    std::ofstream csv(dir / "bench_assign.csv", std::ios::binary);
    if (!csv) throw Error("cannot write " + (dir / "bench_assign.csv").string());
    csv << "n_robots,grid_w,grid_h,makespan,cost,runtime_us\n";
    for (const auto& r : rows) {
      csv << r.n_robots << ',' << r.grid_w << ',' << r.grid_h << ',' << r.makespan << ',' << r.cost << ','
          << io::format_double(r.runtime_us) << '\n';
    }
    if (!csv) throw Error("failed writing bench_assign.csv");
    write_json(dir / "bench_summary.json",
               {{"reps", options.reps},
                {"cell_size", options.cell_size},
                {"warm_start", options.warm_start},
                {"loglog_slope", loglog_slope(rows)}});
    return int{kOk};
  });
}

AblationResult run_ablation(const sim::Scenario& scenario) {
  AblationResult out;
  sim::Scenario full = scenario;
  full.planner.optimize_time = true;
  sim::Scenario spatial = scenario;
  spatial.planner.optimize_time = false;
  out.full = sim::run_scenario(full);
  out.spatial = sim::run_scenario(spatial);
  for (const auto& t : out.full.metrics.ticks) out.fe_max_full = std::max(out.fe_max_full, t.fe_normalized);
  for (const auto& t : out.spatial.metrics.ticks) out.fe_max_spatial = std::max(out.fe_max_spatial, t.fe_normalized);
  out.reduction_percent =
      out.fe_max_spatial > 0.0 ? 100.0 * (out.fe_max_spatial - out.fe_max_full) / out.fe_max_spatial : 0.0;
  return out;
}

int cmd_ablate(const AblateOptions& options) {
  return guarded([&] {
    const sim::Scenario scenario = resolve_scenario(options.scenario, options.seed, std::nullopt);
    prepare_dir(options.out);
    const fs::path dir(options.out);
    write_json(dir / "manifest.json", manifest_json("ablate", options.scenario, options.out, scenario));
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_ablation(scenario);
    const double wall = seconds_since(t0);

    for (const auto& [name, run, mode] : {std::tuple{"full", &result.full, true}, std::tuple{"spatial", &result.spatial, false}}) {
      prepare_dir((dir / name).string());
      sim::Scenario s = scenario;
      s.planner.optimize_time = mode;
      write_run_outputs(dir / name, s, *run, wall);
    }

    std::ofstream csv(dir / "ablation.csv", std::ios::binary);
    if (!csv) throw Error("cannot write " + (dir / "ablation.csv").string());
    csv << "t,fe_full,fe_spatial\n";
    const auto& a = result.full.metrics.ticks;
    const auto& b = result.spatial.metrics.ticks;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      csv << io::format_double(a[i].t) << ',' << io::format_double(a[i].fe_normalized) << ','
          << io::format_double(b[i].fe_normalized) << '\n';
    }
    if (!csv) throw Error("failed writing ablation.csv");
    write_json(dir / "ablation_summary.json",
               {{"scenario", scenario.name},
                {"seed", scenario.seed},
                {"fe_max_full", result.fe_max_full},
                {"fe_max_spatial", result.fe_max_spatial},
                {"reduction_percent", result.reduction_percent},
                {"collisions_full", result.full.metrics.collisions},
                {"collisions_spatial", result.spatial.metrics.collisions}});
    spdlog::info("max f_e full {:.4g}, spatial {:.4g}, reduction {:.1f}%", result.fe_max_full, result.fe_max_spatial,
                 result.reduction_percent);
    if (result.full.metrics.collisions > 0 || result.spatial.metrics.collisions > 0) {
      std::cerr << "safety violation during the ablation runs\n";
      return int{kSafetyViolation};
    }
    return int{kOk};
  });
}

}  // namespace react::cli
