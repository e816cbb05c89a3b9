#pragma once

#include "react/common.hpp"
#include "react/formation.hpp"
#include "react/lbfgs.hpp"
#include "react/minco.hpp"
#include "react/world.hpp"

#include <array>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace react::jstp {

/// Cost terms in weight-vector order.
enum Term : std::size_t { kInter = 0, kObs, kDyn, kForm, kCtrl, kTime };
inline constexpr std::size_t kTermCount = 6;
using TermVector = std::array<double, kTermCount>;

const char* term_name(std::size_t term);

struct PlannerConfig {
  TermVector lambda{1e4, 1e4, 1e2, 1e2, 1.0, 1e1};
  /// Clearance kept from an obstacle's surface.
  double d_thr_obs = 0.25;
  /// Inter-robot threshold on the lateral-weighted distance ||E (p - p_l)||.
  double d_thr_wmr = 0.38;
  /// E = diag(1, b).
  double b = 0.7;
  /// Formation weight matrix W = diag(a, 1).
  double a = 1.0;
  double v_max = 0.6;
  double a_max = 1.0;
  double delta_max = std::numbers::pi / 6.0;
  double wheelbase = 0.144;
  int K = 8;
  int M = 5;
  double replan_hz = 20.0;
  /// Duration per piece for fresh initial guesses and the spatial-only mode.
  double nominal_duration = 0.5;
  double v_ref_ratio = 0.7;
  /// Start speeds above v_max times this factor are clamped.
  double boundary_speed_tolerance = 1.2;
  /// false freezes the durations (spatial-only ablation).
  bool optimize_time = true;
  lbfgs::Settings lbfgs;

  double kappa_max() const;
  double v_ref() const { return v_ref_ratio * v_max; }
  /// Distance the per-cycle goal is projected ahead of the formation slot.
  double horizon_distance() const { return v_ref() * M * nominal_duration; }
  /// Throws InvalidArgument on the first violated invariant.
  void validate() const;
};

/// Constraint sample times: t[i][j] = j T_i / K relative to piece i, tau[i][j]
/// = sum_{r<i} T_r + t[i][j] relative to the trajectory start.
struct SampleGrid {
  std::vector<std::vector<double>> t;
  std::vector<std::vector<double>> tau;
};

SampleGrid sample_times(std::span<const double> durations, int K);

/// Trapezoidal weight of sample j of K.
inline double trapezoid_weight(int j, int K) { return (j == 0 || j == K) ? 0.5 : 1.0; }

double penalty_obs(const Vec2& p, const Vec2& p_obs, double d_thr);
double penalty_inter(const Vec2& p, const Vec2& p_l, double d_thr, double b);

struct DynPenalty {
  double g_v = 0.0;
  double g_a = 0.0;
  double g_delta = 0.0;
  double sum() const { return g_v + g_a + g_delta; }
};

/// Signed curvature of a planar curve; 0 below the speed floor.
double curvature(const Vec2& vel, const Vec2& acc);
inline constexpr double kCurvatureSpeedFloor = 1e-3;

DynPenalty penalty_dyn(const Vec2& vel, const Vec2& acc, const PlannerConfig& config);

/// Formation error of the instantaneous team configuration.
double penalty_form(std::span<const Position2D> positions, const formation::FormationMatrices& desired,
                    const formation::WeightParams& params);

/// Jerk integral with its explicit (c, T) gradient.
double cost_ctrl(const minco::PiecewiseQuintic& traj, std::vector<minco::Coeffs>& grad_c, Eigen::VectorXd& grad_T);
/// Sum of durations; the gradient is all ones.
double cost_time(std::span<const double> durations, Eigen::VectorXd& grad_T);

/// Everything the cost needs besides the ego trajectory.
struct PlanningWorld {
  int ego_id = 0;
  /// Global time of the ego trajectory's t = 0.
  double start_time = 0.0;
  std::span<const ObstacleModel> obstacles;
  /// Latest plans of the team; entries with robot_id == ego_id are ignored.
  std::span<const Broadcast> broadcasts;
  /// Desired Laplacian indexed by robot id; nullptr disables the formation term.
  const formation::FormationMatrices* desired = nullptr;
  formation::WeightParams formation_weights;
};

struct Diagnostics {
  /// Smallest distance from a sample to an obstacle surface.
  double min_obstacle_clearance = std::numeric_limits<double>::infinity();
  /// Smallest centre distance to a neighbour at a matching timestamp.
  double min_inter_distance = std::numeric_limits<double>::infinity();
  double max_curvature = 0.0;
  double max_speed = 0.0;
};

struct CostReport {
  double total = 0.0;
  TermVector terms{};
  std::vector<Vec2> grad_q;
  Eigen::VectorXd grad_T;
  Diagnostics diagnostics;
};

CostReport total_cost(const minco::MincoSystem& system, const PlanningWorld& world, const PlannerConfig& config);
CostReport total_cost(const minco::WaypointParam& param, const PlanningWorld& world, const PlannerConfig& config);
CostReport total_cost(const minco::PiecewiseQuintic& traj, const PlanningWorld& world, const PlannerConfig& config);

struct OptimizeResult {
  minco::PiecewiseQuintic trajectory;
  minco::WaypointParam param;
  CostReport report;
  double initial_cost = 0.0;
  lbfgs::Result solver;
  bool warning() const { return solver.warning(); }
};

/// Minimises total_cost over (q, log T), or over q alone when
/// config.optimize_time is false.
OptimizeResult optimize(const minco::WaypointParam& initial, const PlanningWorld& world, const PlannerConfig& config);

/// Goal of one planning cycle: the formation slot advanced along the corridor.
minco::BoundaryState terminal_goal(const Vec2& slot_position, const Vec2& direction, double distance, double speed);

/// Moves a goal sideways (along y) until it is at least `clearance` from the
/// surface of every static obstacle. The plan end is a hard constraint, so a
/// goal inside the penalty zone would otherwise be unreachable without a violation.
Vec2 clear_of_static_obstacles(const Vec2& goal, std::span<const ObstacleModel> obstacles, double clearance);

minco::WaypointParam initial_straight(const minco::BoundaryState& start, const minco::BoundaryState& goal,
                                      const PlannerConfig& config);
/// Previous plan sampled ahead from `elapsed`, extrapolated past its end.
minco::WaypointParam initial_from_previous(const minco::PiecewiseQuintic& previous, double elapsed,
                                           const minco::BoundaryState& start, const minco::BoundaryState& goal,
                                           const PlannerConfig& config);
/// Polyline resampled by arc length into M+1 points; T_i = segment length / v_ref.
/// Returns nullopt for a degenerate (zero-length) path.
std::optional<minco::WaypointParam> initial_from_path(std::span<const Vec2> path, const minco::BoundaryState& start,
                                                      const minco::BoundaryState& goal, const PlannerConfig& config);

struct PlanRequest {
  /// Global dispatch time.
  double now = 0.0;
  minco::BoundaryState start;
  minco::BoundaryState goal;
  const minco::PiecewiseQuintic* previous = nullptr;
  double previous_start = 0.0;
  /// World-frame route from an assignment transition; takes precedence over `previous`.
  std::vector<Vec2> grid_path;
};

struct PlanResult {
  enum class Init { Straight, Previous, GridPath };
  minco::PiecewiseQuintic trajectory;
  CostReport report;
  double initial_cost = 0.0;
  Init init = Init::Straight;
  lbfgs::Result solver;
  std::vector<std::string> warnings;
};

const char* to_string(PlanResult::Init init);

PlanResult plan_cycle(const PlanRequest& request, const PlanningWorld& world, const PlannerConfig& config);

}  // namespace react::jstp
