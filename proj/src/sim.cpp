#include "react/sim.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace react::sim {

using io::Json;
using io::ObjectReader;
using io::SchemaError;

double Corridor::width_at(double x) const {
  if (sections.empty()) return 0.0;
  double width = sections.front().width;
  for (const auto& s : sections) {
    if (s.x_from <= x) width = s.width;
  }
  return width;
}

void Scenario::validate() const {
  if (schema_version != kSchemaVersion) {
    throw SchemaError("schema_version", "unsupported version " + std::to_string(schema_version) + ", expected " +
                                            std::to_string(kSchemaVersion));
  }
  if (n_robots < 1) throw SchemaError("n_robots", "must be at least 1");
  if (!(footprint.length > 0.0)) throw SchemaError("footprint.length", "must be positive");
  if (!(footprint.width > 0.0)) throw SchemaError("footprint.width", "must be positive");
  if (corridor.sections.empty()) throw SchemaError("corridor.sections", "at least one section required");
  for (std::size_t i = 0; i < corridor.sections.size(); ++i) {
    const std::string p = "corridor.sections[" + std::to_string(i) + "]";
    if (!(corridor.sections[i].width > 0.0)) throw SchemaError(p + ".width", "must be positive");
    if (i > 0 && !(corridor.sections[i].x_from > corridor.sections[i - 1].x_from)) {
      throw SchemaError(p + ".x_from", "sections must be sorted by strictly increasing x_from");
    }
  }
  if (!initial_states.empty() && static_cast<int>(initial_states.size()) != n_robots) {
    throw SchemaError("initial_states", "expected one entry per robot");
  }
  if (!(initial_speed >= 0.0)) throw SchemaError("initial_speed", "must be nonnegative");
  if (!(initial_jitter >= 0.0)) throw SchemaError("initial_jitter", "must be nonnegative");
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw SchemaError("duration", "must be finite and nonnegative");
  if (!(dt >= 0.0)) throw SchemaError("dt", "must be nonnegative (0 selects 1 / replan_hz)");
  try {
    planner.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw SchemaError("planner", e.what());
  }
  if (!(manager.period > 0.0)) throw SchemaError("manager.period", "must be positive");
  if (!(manager.lookahead_time >= 0.0)) throw SchemaError("manager.lookahead_time", "must be nonnegative");
  if (!(manager.structure.lane_width > 0.0)) throw SchemaError("manager.lane_width", "must be positive");
  if (!(manager.structure.column_spacing > 0.0)) throw SchemaError("manager.column_spacing", "must be positive");
  if (!(manager.structure.row_spacing > 0.0)) throw SchemaError("manager.row_spacing", "must be positive");
  if (!(manager.cell_size > 0.0)) throw SchemaError("manager.cell_size", "must be positive");
  if (!(manager.step_time >= 0.0)) throw SchemaError("manager.step_time", "must be nonnegative");
  if (!(safety.margin >= 0.0)) throw SchemaError("safety.margin", "must be nonnegative");
  if (!(safety.ttc_threshold >= 0.0)) throw SchemaError("safety.ttc_threshold", "must be nonnegative");
  if (!(safety.check_step_fraction > 0.0 && safety.check_step_fraction <= 1.0)) {
    throw SchemaError("safety.check_step_fraction", "must lie in (0, 1]");
  }
  if (initial_states.empty()) {
    const double width = corridor.width_at(start_anchor.x());
    if (formation::admissible_columns(n_robots, width, manager.structure) < 1) {
      throw SchemaError("corridor", "width at the start admits no formation column");
    }
  }
}

namespace {

ObstacleModel read_static(const Json& value, const std::string& path) {
  ObjectReader r(value, path);
  const Vec2 c = r.vec2("center");
  const double radius = r.number("radius");
  r.finish();
  if (!(radius >= 0.0)) throw SchemaError(path + ".radius", "must be nonnegative");
  return ObstacleModel::fixed(c, radius);
}

ObstacleModel read_dynamic(const Json& value, const std::string& path) {
  ObjectReader r(value, path);
  const double radius = r.number("radius");
  const Json& path_json = r.at("path");
  r.finish();
  if (!path_json.is_array() || path_json.empty()) throw SchemaError(path + ".path", "expected a nonempty array");
  std::vector<TimedPoint> points;
  for (std::size_t i = 0; i < path_json.size(); ++i) {
    const std::string p = path + ".path[" + std::to_string(i) + "]";
    ObjectReader pr(path_json[i], p);
    TimedPoint tp;
    tp.t = pr.number("t");
    tp.p = pr.vec2("p");
    pr.finish();
    points.push_back(tp);
  }
  try {
    return ObstacleModel::moving(std::move(points), radius);
  } catch (const InvalidArgument& e) {
    throw SchemaError(path, e.what());
  }
}

}  // namespace

Scenario scenario_from_json(const Json& value) {
  Scenario s;
  ObjectReader r(value, "");
  s.schema_version = r.integer_or("schema_version", -1);
  if (s.schema_version != kSchemaVersion) {
    throw SchemaError("schema_version", r.has("schema_version") ? "unsupported version" : "required field is missing");
  }
  s.name = r.string_or("name", "");
  s.n_robots = r.integer_or("n_robots", 0);
  if (!r.has("n_robots")) throw SchemaError("n_robots", "required field is missing");
  if (r.has("footprint")) {
    ObjectReader f(r.at("footprint"), "footprint");
    s.footprint.length = f.number_or("length", s.footprint.length);
    s.footprint.width = f.number_or("width", s.footprint.width);
    f.finish();
  }
  {
    ObjectReader c(r.at("corridor"), "corridor");
    s.corridor.center_y = c.number_or("center_y", 0.0);
    const Json& sections = c.at("sections");
    if (!sections.is_array()) throw SchemaError("corridor.sections", "expected an array");
    for (std::size_t i = 0; i < sections.size(); ++i) {
      ObjectReader sr(sections[i], "corridor.sections[" + std::to_string(i) + "]");
      CorridorSection sec;
      sec.x_from = sr.number("x_from");
      sec.width = sr.number("width");
      sr.finish();
      s.corridor.sections.push_back(sec);
    }
    c.finish();
  }
  const auto read_list = [&](const char* key, auto&& fn) {
    if (!r.has(key)) return;
    const Json& list = r.at(key);
    if (!list.is_array()) throw SchemaError(key, "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) fn(list[i], std::string(key) + "[" + std::to_string(i) + "]");
  };
  read_list("static_obstacles", [&](const Json& v, const std::string& p) { s.obstacles.push_back(read_static(v, p)); });
  read_list("dynamic_obstacles", [&](const Json& v, const std::string& p) { s.obstacles.push_back(read_dynamic(v, p)); });
  read_list("initial_states", [&](const Json& v, const std::string& p) {
    ObjectReader ir(v, p);
    RobotInit init;
    init.position = ir.vec2("position");
    init.heading = ir.number_or("heading", 0.0);
    init.speed = ir.number_or("speed", 0.0);
    ir.finish();
    s.initial_states.push_back(init);
  });
  if (r.has("start_anchor")) s.start_anchor = r.vec2("start_anchor");
  s.initial_speed = r.number_or("initial_speed", s.initial_speed);
  s.initial_jitter = r.number_or("initial_jitter", s.initial_jitter);
  if (r.has("planner")) io::read_planner_config(r.at("planner"), "planner", s.planner);
  if (r.has("manager")) {
    ObjectReader m(r.at("manager"), "manager");
    s.manager.period = m.number_or("period", s.manager.period);
    s.manager.lookahead_time = m.number_or("lookahead_time", s.manager.lookahead_time);
    s.manager.structure.lane_width = m.number_or("lane_width", s.manager.structure.lane_width);
    s.manager.structure.column_spacing = m.number_or("column_spacing", s.manager.structure.column_spacing);
    s.manager.structure.row_spacing = m.number_or("row_spacing", s.manager.structure.row_spacing);
    s.manager.cell_size = m.number_or("cell_size", s.manager.cell_size);
    s.manager.step_time = m.number_or("step_time", s.manager.step_time);
    m.finish();
  }
  if (r.has("safety")) {
    ObjectReader sf(r.at("safety"), "safety");
    s.safety.margin = sf.number_or("margin", s.safety.margin);
    s.safety.ttc_threshold = sf.number_or("ttc_threshold", s.safety.ttc_threshold);
    s.safety.check_step_fraction = sf.number_or("check_step_fraction", s.safety.check_step_fraction);
    sf.finish();
  }
  s.duration = r.number("duration");
  s.dt = r.number_or("dt", 0.0);
  if (r.has("seed")) {
    const Json& seed = r.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
      throw SchemaError("seed", "expected a nonnegative integer");
    }
    s.seed = seed.get<std::uint64_t>();
  }
  r.finish();
  s.validate();
  return s;
}

Json scenario_to_json(const Scenario& s) {
  Json out;
  out["schema_version"] = s.schema_version;
  out["name"] = s.name;
  out["n_robots"] = s.n_robots;
  out["footprint"] = {{"length", s.footprint.length}, {"width", s.footprint.width}};
  Json sections = Json::array();
  for (const auto& sec : s.corridor.sections) sections.push_back({{"x_from", sec.x_from}, {"width", sec.width}});
  out["corridor"] = {{"center_y", s.corridor.center_y}, {"sections", sections}};
  Json statics = Json::array();
  Json dynamics = Json::array();
  for (const auto& o : s.obstacles) {
    if (o.kind() == ObstacleModel::Kind::Static) {
      statics.push_back({{"center", io::vec2_json(o.path().front().p)}, {"radius", o.radius()}});
    } else {
      Json path = Json::array();
      for (const auto& tp : o.path()) path.push_back({{"t", tp.t}, {"p", io::vec2_json(tp.p)}});
      dynamics.push_back({{"radius", o.radius()}, {"path", path}});
    }
  }
  out["static_obstacles"] = statics;
  out["dynamic_obstacles"] = dynamics;
  Json inits = Json::array();
  for (const auto& i : s.initial_states) {
    inits.push_back({{"position", io::vec2_json(i.position)}, {"heading", i.heading}, {"speed", i.speed}});
  }
  out["initial_states"] = inits;
  out["start_anchor"] = io::vec2_json(s.start_anchor);
  out["initial_speed"] = s.initial_speed;
  out["initial_jitter"] = s.initial_jitter;
  out["planner"] = io::planner_config_to_json(s.planner);
  out["manager"] = {{"period", s.manager.period},
                    {"lookahead_time", s.manager.lookahead_time},
                    {"lane_width", s.manager.structure.lane_width},
                    {"column_spacing", s.manager.structure.column_spacing},
                    {"row_spacing", s.manager.structure.row_spacing},
                    {"cell_size", s.manager.cell_size},
                    {"step_time", s.manager.step_time}};
  out["safety"] = {{"margin", s.safety.margin},
                   {"ttc_threshold", s.safety.ttc_threshold},
                   {"check_step_fraction", s.safety.check_step_fraction}};
  out["duration"] = s.duration;
  out["dt"] = s.dt;
  out["seed"] = s.seed;
  return out;
}

Scenario load_scenario(const std::string& path) {
  const Json doc = io::load_file(path);
  if (doc.is_object() && doc.contains("resolved_scenario")) {
    return scenario_from_json(doc.at("resolved_scenario"));
  }
  return scenario_from_json(doc);
}

std::vector<Position2D> WorldState::desired_by_robot() const {
  std::vector<Position2D> out;
  out.reserve(slot_of.size());
  for (const int slot : slot_of) out.push_back(formation.relative_positions[static_cast<std::size_t>(slot)]);
  return out;
}

formation::FormationSpec initial_formation(const Scenario& scenario) {
  const formation::WeightParams weights{scenario.planner.a, false};
  if (!scenario.initial_states.empty()) {
    const int columns = std::max(
        1, formation::admissible_columns(scenario.n_robots, scenario.corridor.width_at(scenario.initial_states[0].position.x()),
                                         scenario.manager.structure));
    return formation::structure_with_columns(scenario.n_robots, columns, scenario.manager.structure, weights);
  }
  return formation::generate_structure(scenario.n_robots, scenario.corridor.width_at(scenario.start_anchor.x()),
                                       scenario.manager.structure, weights);
}

namespace {

minco::PiecewiseQuintic constant_velocity(const Vec2& p, const Vec2& v, double duration) {
  minco::Coeffs c = minco::Coeffs::Zero();
  c.row(0) = p.transpose();
  c.row(1) = v.transpose();
  return minco::PiecewiseQuintic({duration}, {c});
}

double heading_of(const Vec2& v, double fallback) {
  return v.norm() > 1e-6 ? std::atan2(v.y(), v.x()) : fallback;
}

}  // namespace

WorldState initial_state(const Scenario& scenario) {
  WorldState state;
  state.formation = initial_formation(scenario);
  const int n = scenario.n_robots;
  std::mt19937_64 rng(scenario.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const double horizon = scenario.planner.M * scenario.planner.nominal_duration;
  for (int i = 0; i < n; ++i) {
    RobotState r;
    r.id = i;
    Vec2 velocity;
    if (scenario.initial_states.empty()) {
      r.position = scenario.start_anchor + state.formation.relative_positions[static_cast<std::size_t>(i)];
      r.heading = 0.0;
      velocity = Vec2(scenario.initial_speed, 0.0);
    } else {
      const auto& init = scenario.initial_states[static_cast<std::size_t>(i)];
      r.position = init.position;
      r.heading = init.heading;
      velocity = init.speed * Vec2(std::cos(init.heading), std::sin(init.heading));
    }
    if (scenario.initial_jitter > 0.0) {
      const double jx = jitter(rng);
      const double jy = jitter(rng);
      r.position += scenario.initial_jitter * Vec2(jx, jy);
    }
    r.velocity = velocity;
    r.trajectory = constant_velocity(r.position, velocity, horizon);
    r.trajectory_start = 0.0;
    state.robots.push_back(r);
    state.broadcasts.push_back(Broadcast{i, r.trajectory, 0.0});
    state.slot_of.push_back(i);
  }
  if (!scenario.initial_states.empty()) {
    // Explicit starts: pick the slots with the assignment solver so nobody crosses.
    const Vec2 anchor(std::max_element(state.robots.begin(), state.robots.end(),
                                       [](const auto& a, const auto& b) { return a.position.x() < b.position.x(); })
                          ->position.x(),
                      scenario.corridor.center_y);
    std::vector<Position2D> robots;
    std::vector<Position2D> targets;
    for (const auto& r : state.robots) robots.push_back(r.position);
    for (const auto& q : state.formation.relative_positions) targets.push_back(anchor + q);
    for (const double cell : {scenario.manager.cell_size, scenario.manager.cell_size / 2, scenario.manager.cell_size / 4}) {
      try {
        const auto result = assign::solve_assignment(robots, targets, cell);
        state.slot_of = result.assignment;
        break;
      } catch (const assign::RoundingCollision&) {
      }
    }
  }
  return state;
}

Vec2 estimate_anchor(const WorldState& state, const Scenario& scenario) {
  double sum = 0.0;
  for (const auto& r : state.robots) {
    sum += r.position.x() - state.formation.relative_positions[static_cast<std::size_t>(state.slot_of[static_cast<std::size_t>(r.id)])].x();
  }
  return Vec2(sum / static_cast<double>(state.robots.size()), scenario.corridor.center_y);
}

std::optional<Transition> manager_tick(WorldState& state, const Scenario& scenario) {
  double front = -std::numeric_limits<double>::infinity();
  for (const auto& r : state.robots) front = std::max(front, r.position.x());
  const double look = front + scenario.planner.v_ref() * scenario.manager.lookahead_time;
  const double width = scenario.corridor.width_at(look);
  const int columns = formation::admissible_columns(scenario.n_robots, width, scenario.manager.structure);
  if (columns == state.formation.column_count) return std::nullopt;

  Transition tr;
  try {
    tr.formation = formation::generate_structure(scenario.n_robots, width, scenario.manager.structure,
                                                 {scenario.planner.a, false});
  } catch (const formation::InfeasibleStructure& e) {
    state.events.push_back({state.time, "structure_infeasible", -1, {{"width", width}, {"reason", e.what()}}});
    spdlog::warn("t={:.2f} structure infeasible at width {:.2f}: {}", state.time, width, e.what());
    return std::nullopt;
  }
  if (tr.formation.column_count == state.formation.column_count) return std::nullopt;

  const Vec2 anchor = estimate_anchor(state, scenario);
  std::vector<Position2D> robots;
  std::vector<Position2D> targets;
  for (const auto& r : state.robots) robots.push_back(r.position);
  for (const auto& q : tr.formation.relative_positions) targets.push_back(anchor + q);

  double cell = scenario.manager.cell_size;
  for (int attempt = 0; attempt < 3; ++attempt, cell *= 0.5) {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      tr.assignment = assign::solve_assignment(robots, targets, cell);
      const auto t1 = std::chrono::steady_clock::now();
      tr.runtime_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
      tr.cell_size = cell;
      return tr;
    } catch (const assign::RoundingCollision& e) {
      state.events.push_back({state.time, "rounding_collision", -1,
                              {{"cell_size", cell}, {"list", e.list}, {"first", e.first}, {"second", e.second}}});
      spdlog::debug("t={:.2f} rounding collision at cell {:.3f}", state.time, cell);
    }
  }
  state.events.push_back({state.time, "transition_failed", -1, {{"to_columns", tr.formation.column_count}}});
  spdlog::warn("t={:.2f} no collision-free discretisation for the transition", state.time);
  return std::nullopt;
}

void apply_transition(WorldState& state, const Scenario& scenario, const Transition& tr, MetricsLog& log) {
  const auto report = assign::validate_conflict_free(tr.assignment);
  TransitionRecord rec;
  rec.t = state.time;
  rec.from_columns = state.formation.column_count;
  rec.to_columns = tr.formation.column_count;
  rec.cost = tr.assignment.total_cost;
  rec.makespan = tr.assignment.makespan;
  rec.cell_size = tr.cell_size;
  rec.conflict_free = report.ok;
  rec.runtime_us = tr.runtime_us;
  rec.assignment = tr.assignment.assignment;
  rec.grid_trajectories = tr.assignment.grid_trajectories;

  state.formation = tr.formation;
  state.slot_of = tr.assignment.assignment;
  for (auto& r : state.robots) {
    r.route.clear();
    for (const auto& c : tr.assignment.grid_trajectories[static_cast<std::size_t>(r.id)]) {
      r.route.push_back(tr.assignment.problem.robot_frame_position(c));
    }
    r.route_start = state.time;
  }

  Json trajectories = Json::array();
  for (const auto& path : rec.grid_trajectories) {
    Json cells = Json::array();
    for (const auto& c : path) cells.push_back(Json::array({c.x, c.y}));
    trajectories.push_back(cells);
  }
  state.events.push_back({state.time, "transition", -1,
                          {{"from_columns", rec.from_columns},
                           {"to_columns", rec.to_columns},
                           {"cost", rec.cost},
                           {"makespan", rec.makespan},
                           {"cell_size", rec.cell_size},
                           {"conflict_free", rec.conflict_free},
                           {"assignment", rec.assignment},
                           {"grid_trajectories", trajectories}}});
  spdlog::info("t={:.2f} transition {} -> {} columns, cost {}, makespan {}", state.time, rec.from_columns,
               rec.to_columns, rec.cost, rec.makespan);
  (void)scenario;
  log.transitions.push_back(std::move(rec));
}

CollisionResult collision_check(const minco::PiecewiseQuintic& trajectory, double start_time, int ego_id,
                                std::span<const Broadcast> broadcasts, std::span<const ObstacleModel> obstacles,
                                const CollisionParams& params) {
  CollisionResult result;
  if (trajectory.empty()) return result;
  const double total = trajectory.total_duration();
  const int samples = static_cast<int>(std::ceil(total / params.step - 1e-9));
  const double inter_limit = 2.0 * params.robot_radius + params.margin;
  for (int k = 0; k <= samples; ++k) {
    const double t = std::min(k * params.step, total);
    const Vec2 p = trajectory.evaluate(t);
    const double global = start_time + t;
    for (std::size_t o = 0; o < obstacles.size(); ++o) {
      const double d = (p - obstacles[o].position_at(global)).norm();
      if (d < params.robot_radius + obstacles[o].radius()) {
        return {false, global, "obstacle", static_cast<int>(o), d - obstacles[o].radius()};
      }
    }
    for (const auto& b : broadcasts) {
      // Only timestamps both plans cover are comparable.
      if (b.robot_id == ego_id || global > b.end_time() + 1e-9) continue;
      const double d = (p - b.position_at(global)).norm();
      if (d < inter_limit) return {false, global, "robot", b.robot_id, d};
    }
  }
  return result;
}

double time_to_collision(double gap, const Vec2& relative_position, const Vec2& relative_velocity) {
  if (gap <= 0.0) return 0.0;
  const double dist = relative_position.norm();
  if (dist <= 0.0) return 0.0;
  const double closing = -relative_position.dot(relative_velocity) / dist;
  if (closing <= 0.0) return std::numeric_limits<double>::infinity();
  return gap / closing;
}

std::vector<AebDecision> aeb_check(const WorldState& state, const Scenario& scenario) {
  const double r = scenario.footprint.radius();
  std::vector<AebDecision> out;
  for (const auto& a : state.robots) {
    AebDecision d;
    d.robot = a.id;
    for (const auto& b : state.robots) {
      if (b.id == a.id) continue;
      const Vec2 rel = b.position - a.position;
      d.ttc = std::min(d.ttc, time_to_collision(rel.norm() - 2.0 * r, rel, b.velocity - a.velocity));
    }
    for (const auto& o : scenario.obstacles) {
      const Vec2 rel = o.position_at(state.time) - a.position;
      d.ttc = std::min(d.ttc, time_to_collision(rel.norm() - r - o.radius(), rel, o.velocity_at(state.time) - a.velocity));
    }
    d.brake = d.ttc < scenario.safety.ttc_threshold;
    out.push_back(d);
  }
  return out;
}

minco::PiecewiseQuintic braking_trajectory(const Vec2& position, const Vec2& velocity, double deceleration) {
  const double speed = velocity.norm();
  if (speed < 1e-9) return constant_velocity(position, Vec2::Zero(), 1.0);
  minco::Coeffs c = minco::Coeffs::Zero();
  c.row(0) = position.transpose();
  c.row(1) = velocity.transpose();
  c.row(2) = (-0.5 * deceleration / speed * velocity).transpose();
  return minco::PiecewiseQuintic({speed / deceleration}, {c});
}

TickMetrics measure(const WorldState& state, const Scenario& scenario) {
  TickMetrics m;
  m.t = state.time;
  const double r = scenario.footprint.radius();
  std::vector<Position2D> positions;
  for (const auto& robot : state.robots) positions.push_back(robot.position);
  if (positions.size() > 1) {
    const auto desired = state.desired_by_robot();
    m.fe_normalized = formation::normalized_formation_error(positions, desired, {scenario.planner.a, true});
  }
  std::vector<Vec2> obstacle_positions;
  for (const auto& o : scenario.obstacles) obstacle_positions.push_back(o.position_at(state.time));
  for (const auto& robot : state.robots) {
    RobotSample s;
    s.position = robot.position;
    s.heading = robot.heading;
    s.speed = robot.velocity.norm();
    for (const auto& other : state.robots) {
      if (other.id != robot.id) s.min_interdist = std::min(s.min_interdist, (other.position - robot.position).norm());
    }
    for (std::size_t o = 0; o < scenario.obstacles.size(); ++o) {
      const double gap = (obstacle_positions[o] - robot.position).norm() - scenario.obstacles[o].radius() - r;
      s.min_obsdist = std::min(s.min_obsdist, gap);
    }
    m.min_interdist = std::min(m.min_interdist, s.min_interdist);
    m.min_obsdist = std::min(m.min_obsdist, s.min_obsdist);
    m.robots.push_back(s);
  }
  return m;
}

namespace {

// Remaining assignment route, re-anchored at the robot and drifted forward
// with the formation, limited to the planning horizon.
std::vector<Vec2> route_remainder(RobotState& robot, const Scenario& scenario, double now) {
  if (robot.route.size() < 2) return {};
  const double v_ref = scenario.planner.v_ref();
  const double step = scenario.manager.step_time > 0.0 ? scenario.manager.step_time : scenario.manager.cell_size / v_ref;
  const auto k_now = static_cast<std::size_t>(std::floor((now - robot.route_start) / step + 1e-9));
  if (k_now + 1 >= robot.route.size()) {
    robot.route.clear();
    return {};
  }
  const double horizon = scenario.planner.M * scenario.planner.nominal_duration;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / step));
  std::vector<Vec2> path{robot.position};
  const std::size_t last = std::min(robot.route.size() - 1, k_now + steps);
  for (std::size_t k = k_now + 1; k <= last; ++k) {
    const double ahead = v_ref * step * static_cast<double>(k - k_now);
    path.push_back(robot.position + (robot.route[k] - robot.route[k_now]) + Vec2(ahead, 0.0));
  }
  return path;
}

void check_overlaps(const WorldState& state, const Scenario& scenario, double t, std::span<const Vec2> positions,
                    MetricsLog& log, std::vector<Event>& events) {
  const double r = scenario.footprint.radius();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      const double d = (positions[i] - positions[j]).norm();
      if (d < 2.0 * r) {
        ++log.collisions;
        events.push_back({t, "collision", static_cast<int>(i), {{"other_robot", j}, {"distance", d}}});
      }
    }
    for (std::size_t o = 0; o < scenario.obstacles.size(); ++o) {
      const auto& obs = scenario.obstacles[o];
      const double d = (positions[i] - obs.position_at(t)).norm();
      if (d < r + obs.radius()) {
        ++log.collisions;
        events.push_back({t, "collision", static_cast<int>(i), {{"obstacle", o}, {"distance", d}}});
      }
    }
  }
  (void)state;
}

}  // namespace

void step(WorldState& state, const Scenario& scenario, MetricsLog& log) {
  const double dt = scenario.tick();
  const double now = state.time;
  const auto& cfg = scenario.planner;

  if (now + 1e-9 >= state.next_manager_time) {
    state.next_manager_time += scenario.manager.period;
    if (auto tr = manager_tick(state, scenario)) apply_transition(state, scenario, *tr, log);
  }

  // Everyone plans against the same immutable snapshot.
  const std::vector<Broadcast> snapshot = state.broadcasts;
  const formation::WeightParams weights{cfg.a, false};
  const auto desired_positions = state.desired_by_robot();
  const auto desired = formation::build_matrices(desired_positions, weights);
  jstp::PlanningWorld world;
  world.obstacles = scenario.obstacles;
  world.broadcasts = snapshot;
  world.desired = state.robots.size() > 1 ? &desired : nullptr;
  world.formation_weights = weights;
  const Vec2 anchor = estimate_anchor(state, scenario);
  const CollisionParams check{scenario.footprint.radius(), scenario.safety.margin,
                              dt * scenario.safety.check_step_fraction};

  std::vector<std::optional<minco::PiecewiseQuintic>> plans(state.robots.size());
  for (auto& robot : state.robots) {
    if (robot.braking) continue;
    const double elapsed = now - robot.trajectory_start;
    jstp::PlanRequest req;
    req.now = now;
    req.start.position = robot.trajectory.evaluate_clamped(elapsed, 0);
    req.start.velocity = robot.trajectory.evaluate_clamped(elapsed, 1);
    req.start.acceleration = robot.trajectory.evaluate_clamped(elapsed, 2);
    const Vec2 slot = anchor + desired_positions[static_cast<std::size_t>(robot.id)];
    req.goal = jstp::terminal_goal(slot, Vec2::UnitX(), cfg.horizon_distance(), cfg.v_ref());
    req.goal.position = jstp::clear_of_static_obstacles(req.goal.position, scenario.obstacles, cfg.d_thr_obs);
    req.previous = &robot.trajectory;
    req.previous_start = robot.trajectory_start;
    req.grid_path = route_remainder(robot, scenario, now);
    world.ego_id = robot.id;
    try {
      auto result = jstp::plan_cycle(req, world, cfg);
      log.planner_warnings += static_cast<int>(result.warnings.size());
      const auto verdict = collision_check(result.trajectory, now, robot.id, snapshot, scenario.obstacles, check);
      log.plans.push_back({now, robot.id, result.init, result.solver.status, result.solver.iterations,
                           result.initial_cost, result.report.total, result.report.terms,
                           result.trajectory.total_duration(), verdict.ok});
      if (verdict.ok) {
        plans[static_cast<std::size_t>(robot.id)] = std::move(result.trajectory);
      } else {
        ++log.rejected_plans;
        state.events.push_back({now, "rejected_plan", robot.id,
                                {{"violation_time", verdict.time},
                                 {"kind", verdict.kind},
                                 {"other", verdict.other},
                                 {"distance", verdict.distance}}});
        spdlog::debug("t={:.2f} robot {} plan rejected: {} {} at t={:.3f}", now, robot.id, verdict.kind,
                      verdict.other, verdict.time);
      }
    } catch (const Error& e) {
      state.events.push_back({now, "planner_error", robot.id, {{"what", e.what()}}});
      spdlog::error("t={:.2f} robot {} planner error: {}", now, robot.id, e.what());
    }
  }
  for (auto& robot : state.robots) {
    auto& plan = plans[static_cast<std::size_t>(robot.id)];
    if (!plan) continue;
    robot.trajectory = std::move(*plan);
    robot.trajectory_start = now;
    state.broadcasts[static_cast<std::size_t>(robot.id)] = Broadcast{robot.id, robot.trajectory, now};
  }

  for (const auto& d : aeb_check(state, scenario)) {
    auto& robot = state.robots[static_cast<std::size_t>(d.robot)];
    if (d.brake && !robot.braking) {
      robot.braking = true;
      robot.trajectory = braking_trajectory(robot.position, robot.velocity, cfg.a_max);
      robot.trajectory_start = now;
      robot.route.clear();
      state.broadcasts[static_cast<std::size_t>(robot.id)] = Broadcast{robot.id, robot.trajectory, now};
      ++log.aeb_activations;
      state.events.push_back({now, "aeb_engage", robot.id, {{"ttc", d.ttc}}});
      spdlog::warn("t={:.2f} robot {} emergency braking, ttc {:.3f}", now, robot.id, d.ttc);
    } else if (!d.brake && robot.braking) {
      robot.braking = false;
      state.events.push_back({now, "aeb_release", robot.id, {}});
    }
  }

  // Exact tracking; overlaps are checked on the same fine step as plans.
  const int substeps = std::max(1, static_cast<int>(std::lround(1.0 / scenario.safety.check_step_fraction)));
  std::vector<Vec2> positions(state.robots.size());
  for (int s = 1; s <= substeps; ++s) {
    const double t = now + dt * s / substeps;
    for (const auto& robot : state.robots) {
      positions[static_cast<std::size_t>(robot.id)] = robot.trajectory.evaluate_clamped(t - robot.trajectory_start, 0);
    }
    check_overlaps(state, scenario, t, positions, log, state.events);
  }
  ++state.tick_index;
  state.time = state.tick_index * dt;
  for (auto& robot : state.robots) {
    const double local = state.time - robot.trajectory_start;
    robot.position = robot.trajectory.evaluate_clamped(local, 0);
    robot.velocity = robot.trajectory.evaluate_clamped(local, 1);
    robot.acceleration = robot.trajectory.evaluate_clamped(local, 2);
    robot.heading = heading_of(robot.velocity, robot.heading);
  }
  log.ticks.push_back(measure(state, scenario));
}

RunResult run_scenario(const Scenario& scenario) {
  scenario.validate();
  RunResult result;
  result.final_state = initial_state(scenario);
  const double dt = scenario.tick();
  const auto ticks = static_cast<int>(std::floor(scenario.duration / dt + 1e-9));
  for (int k = 0; k < ticks; ++k) step(result.final_state, scenario, result.metrics);
  return result;
}

namespace {

std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void write_trace_csv(const MetricsLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "t,robot_id,x,y,heading,speed,f_e_normalized,min_interdist,min_obsdist\n";
  for (const auto& tick : log.ticks) {
    for (std::size_t i = 0; i < tick.robots.size(); ++i) {
      const auto& r = tick.robots[i];
      out << fmt_num(tick.t) << ',' << i << ',' << fmt_num(r.position.x()) << ',' << fmt_num(r.position.y()) << ','
          << fmt_num(r.heading) << ',' << fmt_num(r.speed) << ',' << fmt_num(tick.fe_normalized) << ','
          << fmt_num(r.min_interdist) << ',' << fmt_num(r.min_obsdist) << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path);
}

void write_planner_csv(const MetricsLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "t,robot_id,init,status,iterations,initial_cost,cost";
  for (std::size_t k = 0; k < jstp::kTermCount; ++k) out << ",term_" << jstp::term_name(k);
  out << ",duration,accepted\n";
  for (const auto& p : log.plans) {
    out << fmt_num(p.t) << ',' << p.robot << ',' << jstp::to_string(p.init) << ',' << lbfgs::to_string(p.status) << ','
        << p.iterations << ',' << fmt_num(p.initial_cost) << ',' << fmt_num(p.cost);
    for (const double v : p.terms) out << ',' << fmt_num(v);
    out << ',' << fmt_num(p.duration) << ',' << (p.accepted ? 1 : 0) << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

Json events_json(const WorldState& state, const MetricsLog& log) {
  Json events = Json::array();
  for (const auto& e : state.events) {
    Json j{{"t", e.t}, {"type", e.type}};
    if (e.robot >= 0) j["robot"] = e.robot;
    if (!e.data.is_null() && !e.data.empty()) j["data"] = e.data;
    events.push_back(std::move(j));
  }
  return {{"events", events},
          {"counts",
           {{"collisions", log.collisions},
            {"transitions", log.transitions.size()},
            {"rejected_plans", log.rejected_plans},
            {"aeb_activations", log.aeb_activations},
            {"planner_warnings", log.planner_warnings}}}};
}

Json summary_json(const Scenario& scenario, const RunResult& result) {
  const auto& m = result.metrics;
  double fe_max = 0.0;
  double fe_sum = 0.0;
  double min_inter = std::numeric_limits<double>::infinity();
  double min_obs = std::numeric_limits<double>::infinity();
  for (const auto& t : m.ticks) {
    fe_max = std::max(fe_max, t.fe_normalized);
    fe_sum += t.fe_normalized;
    min_inter = std::min(min_inter, t.min_interdist);
    min_obs = std::min(min_obs, t.min_obsdist);
  }
  Json columns = Json::array();
  for (const auto& tr : m.transitions) columns.push_back({tr.from_columns, tr.to_columns});
  double progress = 0.0;
  if (!m.ticks.empty() && m.ticks.back().t > 0.0) {
    double x0 = 0.0;
    const auto start = initial_state(scenario);
    for (const auto& r : start.robots) x0 += r.position.x();
    double x1 = 0.0;
    for (const auto& r : result.final_state.robots) x1 += r.position.x();
    progress = (x1 - x0) / static_cast<double>(scenario.n_robots) / m.ticks.back().t;
  }
  return {{"name", scenario.name},
          {"seed", scenario.seed},
          {"ticks", m.ticks.size()},
          {"collisions", m.collisions},
          {"transitions", m.transitions.size()},
          {"transition_columns", columns},
          {"rejected_plans", m.rejected_plans},
          {"aeb_activations", m.aeb_activations},
          {"planner_warnings", m.planner_warnings},
          {"fe_max", fe_max},
          {"fe_mean", m.ticks.empty() ? 0.0 : fe_sum / static_cast<double>(m.ticks.size())},
          {"fe_final", m.ticks.empty() ? 0.0 : m.ticks.back().fe_normalized},
          {"min_interdist", finite_or_null(min_inter)},
          {"min_obsdist", finite_or_null(min_obs)},
          {"mean_progress_speed", progress}};
}

}  // namespace react::sim
