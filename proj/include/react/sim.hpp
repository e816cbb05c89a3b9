#pragma once

#include "react/common.hpp"
#include "react/formation.hpp"
#include "react/io.hpp"
#include "react/jstp.hpp"
#include "react/tcf_r2t.hpp"
#include "react/world.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace react::sim {

inline constexpr int kSchemaVersion = 1;

struct Footprint {
  double length = 0.22;
  double width = 0.19;
  /// Radius of the circumscribed circle.
  double radius() const { return 0.5 * std::hypot(length, width); }
};

/// Navigable width from x_from onwards, until the next section.
struct CorridorSection {
  double x_from = 0.0;
  double width = 0.0;
};

struct Corridor {
  std::vector<CorridorSection> sections;
  double center_y = 0.0;
  /// Width of the last section starting at or before x (first section before the start).
  double width_at(double x) const;
};

struct ManagerConfig {
  double period = 0.5;
  /// The look-ahead point leads the formation front by v_ref times this.
  double lookahead_time = 2.0;
  formation::StructureParams structure;
  /// Grid cell for the transition assignment; halved up to twice on rounding collisions.
  double cell_size = 0.3;
  /// Time per grid step when the assignment routes seed the planner; 0 means cell_size / v_ref.
  double step_time = 0.0;
};

struct SafetyConfig {
  /// Extra centre distance between robots on top of two footprint radii.
  double margin = 0.05;
  double ttc_threshold = 0.3;
  /// Collision check sample step as a fraction of the tick.
  double check_step_fraction = 0.25;
};

struct RobotInit {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
  double speed = 0.0;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name;
  int n_robots = 0;
  Footprint footprint;
  Corridor corridor;
  std::vector<ObstacleModel> obstacles;
  /// Explicit start states; empty places the robots on the initial formation slots.
  std::vector<RobotInit> initial_states;
  /// Front-centre of the initial formation when initial_states is empty.
  Vec2 start_anchor = Vec2::Zero();
  double initial_speed = 0.0;
  /// Uniform position noise applied to the start states, drawn from the seed.
  double initial_jitter = 0.0;
  jstp::PlannerConfig planner;
  ManagerConfig manager;
  SafetyConfig safety;
  double duration = 0.0;
  /// 0 means 1 / planner.replan_hz.
  double dt = 0.0;
  std::uint64_t seed = 0;

  double tick() const { return dt > 0.0 ? dt : 1.0 / planner.replan_hz; }
  /// Throws io::SchemaError naming the offending field.
  void validate() const;
};

Scenario scenario_from_json(const io::Json& value);
/// Every field, defaults included.
io::Json scenario_to_json(const Scenario& scenario);
/// Accepts a scenario file or a run manifest carrying a resolved scenario.
Scenario load_scenario(const std::string& path);

struct RobotState {
  int id = 0;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  Vec2 acceleration = Vec2::Zero();
  double heading = 0.0;
  minco::PiecewiseQuintic trajectory;
  double trajectory_start = 0.0;
  bool braking = false;
  /// Assignment route in world coordinates, one point per grid step.
  std::vector<Vec2> route;
  double route_start = 0.0;
};

struct Event {
  double t = 0.0;
  std::string type;
  int robot = -1;
  io::Json data;
};

struct WorldState {
  double time = 0.0;
  std::vector<RobotState> robots;
  /// Latest plan of every robot, indexed by id.
  std::vector<Broadcast> broadcasts;
  formation::FormationSpec formation;
  /// slot_of[robot id] = index into formation.relative_positions.
  std::vector<int> slot_of;
  double next_manager_time = 0.0;
  int tick_index = 0;
  std::vector<Event> events;

  /// Desired positions ordered by robot id.
  std::vector<Position2D> desired_by_robot() const;
};

struct RobotSample {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
  double speed = 0.0;
  double min_interdist = std::numeric_limits<double>::infinity();
  double min_obsdist = std::numeric_limits<double>::infinity();
};

struct TickMetrics {
  double t = 0.0;
  double fe_normalized = 0.0;
  double min_interdist = std::numeric_limits<double>::infinity();
  /// Smallest footprint-to-obstacle-surface gap.
  double min_obsdist = std::numeric_limits<double>::infinity();
  std::vector<RobotSample> robots;
};

struct TransitionRecord {
  double t = 0.0;
  int from_columns = 0;
  int to_columns = 0;
  std::int64_t cost = 0;
  int makespan = 0;
  double cell_size = 0.0;
  bool conflict_free = false;
  /// Wall-clock solve time; kept out of the deterministic outputs.
  double runtime_us = 0.0;
  std::vector<int> assignment;
  std::vector<std::vector<assign::Cell>> grid_trajectories;
};

/// One planning cycle of one robot.
struct PlanRecord {
  double t = 0.0;
  int robot = 0;
  jstp::PlanResult::Init init = jstp::PlanResult::Init::Straight;
  lbfgs::Status status = lbfgs::Status::Converged;
  int iterations = 0;
  double initial_cost = 0.0;
  double cost = 0.0;
  jstp::TermVector terms{};
  double duration = 0.0;
  bool accepted = false;
};

struct MetricsLog {
  std::vector<TickMetrics> ticks;
  std::vector<PlanRecord> plans;
  std::vector<TransitionRecord> transitions;
  /// Robot-robot or robot-obstacle overlaps found while executing.
  int collisions = 0;
  int rejected_plans = 0;
  int aeb_activations = 0;
  int planner_warnings = 0;
};

/// The formation that a scenario starts in.
formation::FormationSpec initial_formation(const Scenario& scenario);
WorldState initial_state(const Scenario& scenario);

/// Front-centre anchor that best explains the robots' positions under the
/// current slots: mean x offset, corridor centre line for y.
Vec2 estimate_anchor(const WorldState& state, const Scenario& scenario);

struct Transition {
  formation::FormationSpec formation;
  assign::AssignmentResult assignment;
  double cell_size = 0.0;
  double runtime_us = 0.0;
};

/// Periodic manager evaluation. Returns a transition when the look-ahead
/// column count differs from the active one; failures are logged to
/// state.events and leave the formation unchanged.
std::optional<Transition> manager_tick(WorldState& state, const Scenario& scenario);

/// Installs a transition: new slots, desired Laplacian, per-robot routes.
void apply_transition(WorldState& state, const Scenario& scenario, const Transition& transition, MetricsLog& log);

struct CollisionParams {
  double robot_radius = 0.0;
  double margin = 0.0;
  double step = 0.0125;
};

struct CollisionResult {
  bool ok = true;
  /// Global time of the first violation.
  double time = 0.0;
  /// "obstacle" or "robot".
  std::string kind;
  /// Obstacle index or robot id.
  int other = -1;
  double distance = 0.0;
};

/// Samples the plan on a fixed step and checks it against obstacles and all
/// broadcasts of other robots at matching global times.
CollisionResult collision_check(const minco::PiecewiseQuintic& trajectory, double start_time, int ego_id,
                                std::span<const Broadcast> broadcasts, std::span<const ObstacleModel> obstacles,
                                const CollisionParams& params);

/// gap / closing speed under constant velocity, 0 when already touching,
/// infinity when not closing.
double time_to_collision(double gap, const Vec2& relative_position, const Vec2& relative_velocity);

struct AebDecision {
  int robot = 0;
  double ttc = std::numeric_limits<double>::infinity();
  bool brake = false;
};

/// Minimum TTC per robot against all robots and obstacles.
std::vector<AebDecision> aeb_check(const WorldState& state, const Scenario& scenario);

/// Quadratic stop at full deceleration from the given state.
minco::PiecewiseQuintic braking_trajectory(const Vec2& position, const Vec2& velocity, double deceleration);

/// Advances the world by one tick.
void step(WorldState& state, const Scenario& scenario, MetricsLog& log);

/// Metrics of the current state; appended by step() after every tick.
TickMetrics measure(const WorldState& state, const Scenario& scenario);

struct RunResult {
  MetricsLog metrics;
  WorldState final_state;
};

RunResult run_scenario(const Scenario& scenario);

void write_trace_csv(const MetricsLog& log, const std::string& path);
/// Per-cycle planner diagnostics.
void write_planner_csv(const MetricsLog& log, const std::string& path);
io::Json events_json(const WorldState& state, const MetricsLog& log);
/// Summary statistics shared by the CLI and the acceptance suite.
io::Json summary_json(const Scenario& scenario, const RunResult& result);

}  // namespace react::sim
