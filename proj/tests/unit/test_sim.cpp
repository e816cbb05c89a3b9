#include "doctest.h"

#include "react/sim.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace react;
using namespace react::sim;
using io::Json;

namespace {

Json base_json(int n_robots, double duration) {
  return Json{{"schema_version", 1},
              {"name", "unit"},
              {"n_robots", n_robots},
              {"corridor", {{"center_y", 0.0}, {"sections", Json::array({{{"x_from", -100.0}, {"width", 2.0}}})}}},
              {"initial_speed", 0.42},
              {"duration", duration},
              {"seed", 3}};
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string field_of(const Json& j) {
  try {
    scenario_from_json(j).validate();
  } catch (const io::SchemaError& e) {
    return e.field;
  }
  return "";
}

}  // namespace

TEST_CASE("sim: corridor width lookup") {
  Corridor c;
  c.sections = {{0.0, 2.0}, {4.0, 1.3}, {8.0, 2.5}};
  CHECK(c.width_at(-5.0) == 2.0);
  CHECK(c.width_at(0.0) == 2.0);
  CHECK(c.width_at(3.99) == 2.0);
  CHECK(c.width_at(4.0) == 1.3);
  CHECK(c.width_at(7.0) == 1.3);
  CHECK(c.width_at(100.0) == 2.5);
}

TEST_CASE("sim: footprint radius") {
  Footprint f;
  CHECK(f.radius() == doctest::Approx(0.5 * std::sqrt(0.22 * 0.22 + 0.19 * 0.19)));
}

TEST_CASE("sim: scenario schema errors name the field") {
  auto j = base_json(3, 1.0);
  CHECK(field_of(j).empty());

  auto missing = j;
  missing.erase("duration");
  CHECK(field_of(missing) == "duration");

  auto version = j;
  version["schema_version"] = 2;
  CHECK(field_of(version) == "schema_version");

  auto typo = j;
  typo["planner"] = {{"lambda", {{"form", 1.0}, {"frm", 2.0}}}};
  CHECK(field_of(typo) == "planner.lambda.frm");

  auto unknown = j;
  unknown["speed"] = 1.0;
  CHECK(field_of(unknown) == "speed");

  auto bad_type = j;
  bad_type["n_robots"] = "six";
  CHECK(field_of(bad_type) == "n_robots");

  auto unsorted = j;
  unsorted["corridor"]["sections"] = Json::array({{{"x_from", 2.0}, {"width", 2.0}}, {{"x_from", 1.0}, {"width", 1.3}}});
  CHECK(field_of(unsorted) == "corridor.sections[1].x_from");

  auto narrow = j;
  narrow["corridor"]["sections"][0]["width"] = 0.3;
  CHECK(field_of(narrow) == "corridor");

  auto bad_vec = j;
  bad_vec["static_obstacles"] = Json::array({{{"center", {1.0}}, {"radius", 0.1}}});
  CHECK(field_of(bad_vec) == "static_obstacles[0].center");

  CHECK_THROWS_AS(io::parse_text("{\n  \"a\": ,\n}", "x.json"), io::SchemaError);
  try {
    io::parse_text("{\n  \"a\": ,\n}", "x.json");
  } catch (const io::SchemaError& e) {
    CHECK(e.field == "x.json:2:8");
  }
}

TEST_CASE("sim: scenario round trip materialises defaults") {
  auto j = base_json(4, 2.0);
  j["static_obstacles"] = Json::array({{{"center", {1.0, 0.3}}, {"radius", 0.1}}});
  j["dynamic_obstacles"] = Json::array({{{"radius", 0.1}, {"path", Json::array({{{"t", 0.0}, {"p", {2.0, 0.3}}}, {{"t", 5.0}, {"p", {3.0, 0.3}}}})}}});
  const Scenario s = scenario_from_json(j);
  const Json full = scenario_to_json(s);
  CHECK(full.contains("planner"));
  CHECK(full.contains("manager"));
  CHECK(full.contains("safety"));
  CHECK(scenario_to_json(scenario_from_json(full)) == full);
  REQUIRE(s.obstacles.size() == 2);
  CHECK(s.obstacles[0].kind() == ObstacleModel::Kind::Static);
  CHECK(s.obstacles[1].kind() == ObstacleModel::Kind::Dynamic);
}

TEST_CASE("sim: trajectory json") {
  minco::Coeffs a = minco::Coeffs::Zero();
  a.row(0) << 1.0, 2.0;
  a.row(1) << 0.5, 0.0;
  a.row(3) << 0.01, -0.02;
  minco::Coeffs b = minco::Coeffs::Zero();
  b.row(0) << 1.5, 2.0;
  b.row(5) << 1e-3, 3e-3;
  const minco::PiecewiseQuintic traj({1.0, 0.5}, {a, b});
  const Json j = io::trajectory_to_json(traj);
  CHECK(j["M"] == 2);
  CHECK(j["c"][0].size() == 12);
  // Row-major: entries 2 and 3 are the t^1 row.
  CHECK(j["c"][0][2] == 0.5);
  CHECK(j["c"][0][6] == 0.01);
  CHECK(j["c"][0][7] == -0.02);
  const auto back = io::trajectory_from_json(Json::parse(j.dump()));
  CHECK(back.durations() == traj.durations());
  for (std::size_t i = 0; i < 2; ++i) CHECK(back.coefficients()[i] == traj.coefficients()[i]);

  auto wrong = j;
  wrong["T"] = Json::array({1.0});
  CHECK_THROWS_AS(io::trajectory_from_json(wrong), io::SchemaError);
  wrong = j;
  wrong["c"][1] = Json::array({1.0, 2.0});
  CHECK_THROWS_AS(io::trajectory_from_json(wrong), io::SchemaError);
  wrong = j;
  wrong["T"][0] = -1.0;
  CHECK_THROWS_AS(io::trajectory_from_json(wrong), io::SchemaError);
}

namespace {

minco::PiecewiseQuintic line(const Vec2& p, const Vec2& v, double duration) {
  minco::Coeffs c = minco::Coeffs::Zero();
  c.row(0) = p.transpose();
  c.row(1) = v.transpose();
  return minco::PiecewiseQuintic({duration}, {c});
}

}  // namespace

TEST_CASE("sim: collision check") {
  CollisionParams params{0.145, 0.05, 0.0125};
  const std::vector<ObstacleModel> obstacles{ObstacleModel::fixed({1.0, 0.0}, 0.1)};
  const auto through = line({0.0, 0.0}, {1.0, 0.0}, 2.0);
  auto res = collision_check(through, 10.0, 0, {}, obstacles, params);
  CHECK_FALSE(res.ok);
  CHECK(res.kind == "obstacle");
  CHECK(res.other == 0);
  // First sample with |x - 1| < 0.245, on the 0.0125 grid.
  CHECK(res.time == doctest::Approx(10.0 + 0.7625));

  const std::vector<Broadcast> far{Broadcast{1, line({0.0, 10.0}, {1.0, 0.0}, 2.0), 10.0}};
  CHECK(collision_check(line({0.0, 0.0}, {1.0, 0.0}, 2.0), 10.0, 0, far, {}, params).ok);

  // Same timestamps, 0.3 apart: inside 2r + margin = 0.34.
  const std::vector<Broadcast> close{Broadcast{1, line({0.0, 0.3}, {1.0, 0.0}, 2.0), 10.0}};
  res = collision_check(line({0.0, 0.0}, {1.0, 0.0}, 2.0), 10.0, 0, close, {}, params);
  CHECK_FALSE(res.ok);
  CHECK(res.kind == "robot");
  CHECK(res.other == 1);
  CHECK(res.time == doctest::Approx(10.0));
  // The ego's own broadcast is ignored.
  CHECK(collision_check(line({0.0, 0.0}, {1.0, 0.0}, 2.0), 10.0, 1, close, {}, params).ok);

  // A neighbour whose plan ends early is not compared past its end.
  const std::vector<Broadcast> short_plan{Broadcast{1, line({0.0, 0.0}, {1.0, 0.0}, 0.5), 10.0}};
  CHECK(collision_check(line({1.0, 0.0}, {1.0, 0.0}, 2.0), 10.0, 0, short_plan, {}, params).ok);

  // Moving obstacle crossing the path later.
  const std::vector<ObstacleModel> moving{ObstacleModel::moving({{10.5, {1.5, 2.0}}, {12.5, {1.5, -2.0}}}, 0.1)};
  res = collision_check(through, 10.0, 0, {}, moving, params);
  CHECK_FALSE(res.ok);
  CHECK(res.time > 11.0);
}

TEST_CASE("sim: time to collision") {
  CHECK(time_to_collision(0.5, {1.0, 0.0}, {-1.0, 0.0}) == doctest::Approx(0.5));
  CHECK(std::isinf(time_to_collision(0.5, {1.0, 0.0}, {1.0, 0.0})));
  CHECK(std::isinf(time_to_collision(0.5, {1.0, 0.0}, {0.0, 1.0})));
  CHECK(time_to_collision(-0.1, {1.0, 0.0}, {1.0, 0.0}) == 0.0);
  // Only the radial part closes the gap.
  CHECK(time_to_collision(0.5, {3.0, 4.0}, {-0.6, -0.8}) == doctest::Approx(0.5));
}

TEST_CASE("sim: braking trajectory stops") {
  const auto b = braking_trajectory({1.0, 2.0}, {0.6, 0.0}, 1.2);
  CHECK(b.total_duration() == doctest::Approx(0.5));
  CHECK(b.evaluate_clamped(0.5, 1).norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b.evaluate_clamped(0.5, 0).x() == doctest::Approx(1.0 + 0.36 / 2.4));
  CHECK(b.evaluate_clamped(10.0, 0).x() == doctest::Approx(1.0 + 0.36 / 2.4));
}

TEST_CASE("sim: duration zero returns the initial state") {
  auto s = scenario_from_json(base_json(3, 0.0));
  const auto r = run_scenario(s);
  CHECK(r.metrics.ticks.empty());
  CHECK(r.final_state.time == 0.0);
  const auto init = initial_state(s);
  for (std::size_t i = 0; i < init.robots.size(); ++i) CHECK(r.final_state.robots[i].position == init.robots[i].position);
}

TEST_CASE("sim: invalid scenario is rejected before stepping") {
  auto s = scenario_from_json(base_json(3, 1.0));
  s.duration = -1.0;
  CHECK_THROWS_AS(run_scenario(s), io::SchemaError);
}

TEST_CASE("sim: constant width never triggers the manager") {
  const auto s = scenario_from_json(base_json(5, 1.0));
  auto state = initial_state(s);
  for (double x : {0.0, 5.0, 50.0}) {
    for (auto& r : state.robots) r.position.x() += x;
    CHECK_FALSE(manager_tick(state, s).has_value());
  }
  CHECK(state.events.empty());
}

TEST_CASE("sim: narrowing ahead triggers one transition") {
  auto j = base_json(6, 1.0);
  j["corridor"]["sections"] = Json::array({{{"x_from", -100.0}, {"width", 2.0}}, {{"x_from", 0.8}, {"width", 1.3}}});
  const auto s = scenario_from_json(j);
  auto state = initial_state(s);
  CHECK(state.formation.column_count == 3);
  const auto tr = manager_tick(state, s);
  REQUIRE(tr.has_value());
  CHECK(tr->formation.column_count == 2);
  MetricsLog log;
  apply_transition(state, s, *tr, log);
  REQUIRE(log.transitions.size() == 1);
  CHECK(log.transitions[0].conflict_free);
  CHECK(state.formation.column_count == 2);
  CHECK_FALSE(manager_tick(state, s).has_value());
  for (const auto& r : state.robots) CHECK(r.route.size() == static_cast<std::size_t>(tr->assignment.makespan + 1));
}

TEST_CASE("sim: teleporting obstacle triggers emergency braking within a tick") {
  auto j = base_json(1, 1.5);
  // Far away until t = 1.0, then right in front of the robot.
  const double x_at_jump = 0.42 * 1.0;
  j["dynamic_obstacles"] = Json::array({{{"radius", 0.05},
                                         {"path", Json::array({{{"t", 0.0}, {"p", {50.0, 50.0}}},
                                                               {{"t", 1.0}, {"p", {50.0, 50.0}}},
                                                               {{"t", 1.0 + 1e-6}, {"p", {x_at_jump + 0.3, 0.0}}}})}}});
  const auto s = scenario_from_json(j);
  const double dt = s.tick();
  const auto r = run_scenario(s);
  double engaged = -1.0;
  for (const auto& e : r.final_state.events) {
    if (e.type == "aeb_engage") {
      engaged = e.t;
      break;
    }
  }
  REQUIRE(engaged >= 0.0);
  CHECK(engaged >= 1.0 - 1e-9);
  CHECK(engaged <= 1.0 + dt + 1e-9);
  CHECK(r.metrics.aeb_activations >= 1);
}

TEST_CASE("sim: empty world keeps the formation") {
  auto j = base_json(4, 2.0);
  j["planner"] = {{"lambda", {{"inter", 1e6}, {"obs", 1e6}, {"dyn", 1e4}, {"form", 10.0}, {"ctrl", 1.0}, {"time", 30.0}}}};
  const auto r = run_scenario(scenario_from_json(j));
  REQUIRE(r.metrics.ticks.size() == 40);
  for (const auto& t : r.metrics.ticks) CHECK(t.fe_normalized < 1e-3);
  CHECK(r.metrics.collisions == 0);
}

TEST_CASE("sim: identical seeds give identical traces") {
  auto j = base_json(3, 1.0);
  j["initial_jitter"] = 0.02;
  const auto s = scenario_from_json(j);
  const auto dir = std::filesystem::temp_directory_path() / "react_unit_determinism";
  std::filesystem::create_directories(dir);
  const auto a = (dir / "a.csv").string();
  const auto b = (dir / "b.csv").string();
  write_trace_csv(run_scenario(s).metrics, a);
  write_trace_csv(run_scenario(s).metrics, b);
  CHECK(read_all(a) == read_all(b));
  CHECK(read_all(a).rfind("t,robot_id,x,y,heading,speed,f_e_normalized,min_interdist,min_obsdist\n", 0) == 0);

  auto other = s;
  other.seed = 4;
  const auto c = (dir / "c.csv").string();
  write_trace_csv(run_scenario(other).metrics, c);
  CHECK(read_all(a) != read_all(c));
  std::filesystem::remove_all(dir);
}

TEST_CASE("sim: manifest replay loads the resolved scenario") {
  const auto s = scenario_from_json(base_json(2, 0.5));
  const auto dir = std::filesystem::temp_directory_path() / "react_unit_manifest";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "manifest.json").string();
  {
    std::ofstream out(path);
    out << Json{{"resolved_scenario", scenario_to_json(s)}, {"seed", 3}}.dump(2);
  }
  CHECK(scenario_to_json(load_scenario(path)) == scenario_to_json(s));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_scenario((dir / "missing.json").string()), io::SchemaError);
}
