#include "react/jstp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace react::jstp {

using minco::Coeffs;
using minco::MincoSystem;
using minco::PiecewiseQuintic;
using minco::WaypointParam;

const char* term_name(std::size_t term) {
  static const char* names[kTermCount] = {"inter", "obs", "dyn", "form", "ctrl", "time"};
  return term < kTermCount ? names[term] : "unknown";
}

const char* to_string(PlanResult::Init init) {
  switch (init) {
    case PlanResult::Init::Straight: return "straight";
    case PlanResult::Init::Previous: return "previous";
    case PlanResult::Init::GridPath: return "grid_path";
  }
  return "unknown";
}

double PlannerConfig::kappa_max() const { return std::tan(delta_max) / wheelbase; }

void PlannerConfig::validate() const {
  for (std::size_t k = 0; k < kTermCount; ++k) {
    if (!(lambda[k] >= 0.0) || !std::isfinite(lambda[k])) {
      throw InvalidArgument(std::string("planner.lambda.") + term_name(k) + " must be finite and nonnegative");
    }
  }
  for (const std::size_t c : {kInter, kObs}) {
    for (const std::size_t o : {kDyn, kForm, kCtrl, kTime}) {
      if (lambda[c] < 10.0 * lambda[o]) {
        throw InvalidArgument(std::string("planner.lambda.") + term_name(c) + " must be at least 10x lambda." +
                              term_name(o));
      }
    }
  }
  if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("planner.b must lie in (0, 1)");
  if (!(a > 0.0)) throw InvalidArgument("planner.a must be positive");
  if (!(v_max > 0.0)) throw InvalidArgument("planner.v_max must be positive");
  if (!(a_max > 0.0)) throw InvalidArgument("planner.a_max must be positive");
  if (!(wheelbase > 0.0)) throw InvalidArgument("planner.wheelbase must be positive");
  if (!(delta_max > 0.0 && delta_max < std::numbers::pi / 2.0)) {
    throw InvalidArgument("planner.delta_max must lie in (0, pi/2)");
  }
  if (!(d_thr_obs >= 0.0)) throw InvalidArgument("planner.d_thr_obs must be nonnegative");
  if (!(d_thr_wmr >= 0.0)) throw InvalidArgument("planner.d_thr_wmr must be nonnegative");
  if (K < 2) throw InvalidArgument("planner.K must be at least 2");
  if (M < 1) throw InvalidArgument("planner.M must be at least 1");
  if (!(replan_hz > 0.0)) throw InvalidArgument("planner.replan_hz must be positive");
  if (!(nominal_duration > 0.0)) throw InvalidArgument("planner.nominal_duration must be positive");
  if (!(v_ref_ratio > 0.0 && v_ref_ratio <= 1.0)) throw InvalidArgument("planner.v_ref_ratio must lie in (0, 1]");
  if (!(boundary_speed_tolerance >= 1.0)) throw InvalidArgument("planner.boundary_speed_tolerance must be >= 1");
  if (lbfgs.memory < 1) throw InvalidArgument("planner.lbfgs.memory must be at least 1");
  if (lbfgs.max_iterations < 0) throw InvalidArgument("planner.lbfgs.max_iterations must be nonnegative");
  if (!(lbfgs.grad_tolerance >= 0.0)) throw InvalidArgument("planner.lbfgs.grad_tolerance must be nonnegative");
  if (!(lbfgs.relative_cost_tolerance >= 0.0)) {
    throw InvalidArgument("planner.lbfgs.relative_cost_tolerance must be nonnegative");
  }
}

SampleGrid sample_times(std::span<const double> durations, int K) {
  if (K < 2) throw InvalidArgument("sample_times: K must be at least 2");
  SampleGrid grid;
  double offset = 0.0;
  for (const double d : durations) {
    std::vector<double> t(static_cast<std::size_t>(K + 1));
    std::vector<double> tau(static_cast<std::size_t>(K + 1));
    for (int j = 0; j <= K; ++j) {
      t[static_cast<std::size_t>(j)] = j * d / K;
      tau[static_cast<std::size_t>(j)] = offset + j * d / K;
    }
    grid.t.push_back(std::move(t));
    grid.tau.push_back(std::move(tau));
    offset += d;
  }
  return grid;
}

double penalty_obs(const Vec2& p, const Vec2& p_obs, double d_thr) {
  return std::max(d_thr * d_thr - (p - p_obs).squaredNorm(), 0.0);
}

double penalty_inter(const Vec2& p, const Vec2& p_l, double d_thr, double b) {
  const Vec2 e(p.x() - p_l.x(), b * (p.y() - p_l.y()));
  return std::max(d_thr * d_thr - e.squaredNorm(), 0.0);
}

double curvature(const Vec2& vel, const Vec2& acc) {
  const double speed = vel.norm();
  if (speed < kCurvatureSpeedFloor) return 0.0;
  return (vel.x() * acc.y() - vel.y() * acc.x()) / (speed * speed * speed);
}

DynPenalty penalty_dyn(const Vec2& vel, const Vec2& acc, const PlannerConfig& config) {
  DynPenalty g;
  g.g_v = std::max(vel.squaredNorm() - config.v_max * config.v_max, 0.0);
  g.g_a = std::max(acc.squaredNorm() - config.a_max * config.a_max, 0.0);
  const double kappa = curvature(vel, acc);
  const double kmax = config.kappa_max();
  g.g_delta = std::max(kappa * kappa - kmax * kmax, 0.0);
  return g;
}

double penalty_form(std::span<const Position2D> positions, const formation::FormationMatrices& desired,
                    const formation::WeightParams& params) {
  formation::WeightParams raw = params;
  raw.normalize = false;
  return formation::formation_error(formation::build_matrices(positions, raw), desired);
}

double cost_ctrl(const PiecewiseQuintic& traj, std::vector<Coeffs>& grad_c, Eigen::VectorXd& grad_T) {
  minco::jerk_energy_gradient(traj, grad_c, grad_T);
  return minco::jerk_energy(traj);
}

double cost_time(std::span<const double> durations, Eigen::VectorXd& grad_T) {
  grad_T = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(durations.size()));
  double sum = 0.0;
  for (const double d : durations) sum += d;
  return sum;
}

namespace {

// Per-sample integrand with its partial derivatives; `dtau` is the explicit
// derivative through other agents' motion at the global timestamp.
struct Integrand {
  double value = 0.0;
  Vec2 dp = Vec2::Zero();
  Vec2 dv = Vec2::Zero();
  Vec2 da = Vec2::Zero();
  double dtau = 0.0;

  void add_scaled(const Integrand& o, double w) {
    value += w * o.value;
    dp += w * o.dp;
    dv += w * o.dv;
    da += w * o.da;
    dtau += w * o.dtau;
  }
};

struct Scene {
  std::vector<const Broadcast*> neighbors;
  // Team positions by robot id, refreshed per sample when the formation term is active.
  std::vector<const Broadcast*> by_id;
  bool formation = false;
};

Scene prepare_scene(const PlanningWorld& world) {
  Scene scene;
  for (const auto& b : world.broadcasts) {
    if (b.robot_id != world.ego_id) scene.neighbors.push_back(&b);
  }
  if (world.desired != nullptr && world.desired->size() > 1) {
    const auto n = static_cast<std::size_t>(world.desired->size());
    if (world.ego_id < 0 || static_cast<std::size_t>(world.ego_id) >= n) {
      throw InvalidArgument("total_cost: ego id outside the desired formation");
    }
    scene.by_id.assign(n, nullptr);
    for (const auto* b : scene.neighbors) {
      if (b->robot_id < 0 || static_cast<std::size_t>(b->robot_id) >= n) {
        throw InvalidArgument("total_cost: neighbour id outside the desired formation");
      }
      scene.by_id[static_cast<std::size_t>(b->robot_id)] = b;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i != static_cast<std::size_t>(world.ego_id) && scene.by_id[i] == nullptr) {
        throw InvalidArgument("total_cost: formation term needs every teammate's broadcast");
      }
    }
    scene.formation = true;
  }
  return scene;
}

Integrand obstacle_integrand(const Vec2& p, double global_t, const PlanningWorld& world, const PlannerConfig& config,
                             Diagnostics& diag) {
  Integrand out;
  // Static obstacles: only the nearest surface counts.
  const ObstacleModel* nearest = nullptr;
  double nearest_surface = std::numeric_limits<double>::infinity();
  for (const auto& obs : world.obstacles) {
    const Vec2 c = obs.position_at(global_t);
    const double surface = (p - c).norm() - obs.radius();
    diag.min_obstacle_clearance = std::min(diag.min_obstacle_clearance, surface);
    if (obs.kind() == ObstacleModel::Kind::Static) {
      if (surface < nearest_surface) {
        nearest_surface = surface;
        nearest = &obs;
      }
      continue;
    }
    const double thr = config.d_thr_obs + obs.radius();
    const double g = penalty_obs(p, c, thr);
    if (g <= 0.0) continue;
    const Vec2 diff = p - c;
    const double g2 = 3.0 * g * g;
    out.value += g * g * g;
    out.dp += g2 * (-2.0 * diff);
    out.dtau += g2 * (2.0 * diff.dot(obs.velocity_at(global_t)));
  }
  if (nearest != nullptr) {
    const Vec2 c = nearest->position_at(global_t);
    const double g = penalty_obs(p, c, config.d_thr_obs + nearest->radius());
    if (g > 0.0) {
      out.value += g * g * g;
      out.dp += 3.0 * g * g * (-2.0 * (p - c));
    }
  }
  return out;
}

Integrand inter_integrand(const Vec2& p, double global_t, const Scene& scene, const PlannerConfig& config,
                          Diagnostics& diag) {
  Integrand out;
  const double b2 = config.b * config.b;
  for (const auto* nb : scene.neighbors) {
    const Vec2 pl = nb->position_at(global_t);
    const Vec2 diff = p - pl;
    diag.min_inter_distance = std::min(diag.min_inter_distance, diff.norm());
    const double g = penalty_inter(p, pl, config.d_thr_wmr, config.b);
    if (g <= 0.0) continue;
    const Vec2 e2diff(diff.x(), b2 * diff.y());
    const double g2 = 3.0 * g * g;
    out.value += g * g * g;
    out.dp += g2 * (-2.0 * e2diff);
    out.dtau += g2 * (2.0 * e2diff.dot(nb->velocity_at(global_t)));
  }
  return out;
}

Integrand dyn_integrand(const Vec2& v, const Vec2& a, const PlannerConfig& config, Diagnostics& diag) {
  Integrand out;
  const double speed = v.norm();
  diag.max_speed = std::max(diag.max_speed, speed);
  const double kappa = curvature(v, a);
  diag.max_curvature = std::max(diag.max_curvature, std::abs(kappa));

  const DynPenalty g = penalty_dyn(v, a, config);
  const double s = g.sum();
  if (s <= 0.0) return out;
  Vec2 ds_dv = Vec2::Zero();
  Vec2 ds_da = Vec2::Zero();
  if (g.g_v > 0.0) ds_dv += 2.0 * v;
  if (g.g_a > 0.0) ds_da += 2.0 * a;
  if (g.g_delta > 0.0) {
    const double cross = v.x() * a.y() - v.y() * a.x();
    const double s2 = v.squaredNorm();
    const double s3 = s2 * s2 * s2;
    ds_dv += (2.0 * cross / s3) * Vec2(a.y(), -a.x()) - (6.0 * cross * cross / (s3 * s2)) * v;
    ds_da += (2.0 * cross / s3) * Vec2(-v.y(), v.x());
  }
  const double s2 = 3.0 * s * s;
  out.value = s * s * s;
  out.dv = s2 * ds_dv;
  out.da = s2 * ds_da;
  return out;
}

Integrand form_integrand(const Vec2& p, double global_t, const PlanningWorld& world, const Scene& scene,
                         std::vector<Vec2>& positions) {
  Integrand out;
  const auto n = scene.by_id.size();
  positions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    positions[i] = scene.by_id[i] ? scene.by_id[i]->position_at(global_t) : p;
  }
  const auto ego = static_cast<std::size_t>(world.ego_id);
  positions[ego] = p;
  const auto eval = formation::formation_error_with_gradient(positions, *world.desired, world.formation_weights);
  out.value = eval.value;
  out.dp = eval.gradient[ego];
  for (std::size_t i = 0; i < n; ++i) {
    if (i != ego) out.dtau += eval.gradient[i].dot(scene.by_id[i]->velocity_at(global_t));
  }
  return out;
}

}  // namespace

CostReport total_cost(const MincoSystem& system, const PlanningWorld& world, const PlannerConfig& config) {
  const PiecewiseQuintic& traj = system.trajectory();
  const std::size_t m = traj.pieces();
  if (config.K < 2) throw InvalidArgument("total_cost: K must be at least 2");
  const Scene scene = prepare_scene(world);
  const TermVector& lambda = config.lambda;
  const bool need_inter = lambda[kInter] != 0.0 && !scene.neighbors.empty();
  const bool need_obs = lambda[kObs] != 0.0 && !world.obstacles.empty();
  const bool need_dyn = lambda[kDyn] != 0.0;
  const bool need_form = lambda[kForm] != 0.0 && scene.formation;

  CostReport report;
  std::vector<Coeffs> grad_c(m, Coeffs::Zero());
  Eigen::VectorXd grad_T = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  // Sum over pieces of the explicit timestamp sensitivity; feeds every later T_r.
  Eigen::VectorXd tau_sens = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  std::vector<Vec2> positions;
  const int K = config.K;

  for (std::size_t i = 0; i < m; ++i) {
    const double Ti = traj.duration(i);
    const double start = traj.piece_start(i);
    const auto ii = static_cast<Eigen::Index>(i);
    for (int j = 0; j <= K; ++j) {
      const double frac = static_cast<double>(j) / K;
      const double t = frac * Ti;
      const double global_t = world.start_time + start + t;
      const double s = trapezoid_weight(j, K) / K;
      const auto b0 = minco::basis(t, 0);
      const auto b1 = minco::basis(t, 1);
      const auto b2 = minco::basis(t, 2);
      const auto& c = traj.coeffs(i);
      const Vec2 p = c.transpose() * b0;
      const Vec2 v = c.transpose() * b1;
      const Vec2 a = c.transpose() * b2;
      const Vec2 jerk = c.transpose() * minco::basis(t, 3);

      Integrand total;
      Integrand parts[4];
      // Collision diagnostics are always gathered, even with zero weight.
      parts[kInter] = inter_integrand(p, global_t, scene, config, report.diagnostics);
      parts[kObs] = obstacle_integrand(p, global_t, world, config, report.diagnostics);
      parts[kDyn] = dyn_integrand(v, a, config, report.diagnostics);
      if (need_form) parts[kForm] = form_integrand(p, global_t, world, scene, positions);
      const bool active[4] = {need_inter, need_obs, need_dyn, need_form};
      for (std::size_t k = 0; k < 4; ++k) {
        report.terms[k] += Ti * s * parts[k].value;
        if (active[k]) total.add_scaled(parts[k], lambda[k]);
      }
      if (total.value == 0.0 && total.dp.isZero(0.0) && total.dv.isZero(0.0) && total.da.isZero(0.0) &&
          total.dtau == 0.0) {
        continue;
      }
      const double w = Ti * s;
      grad_c[i] += w * (b0 * total.dp.transpose() + b1 * total.dv.transpose() + b2 * total.da.transpose());
      const double chain = total.dp.dot(v) + total.dv.dot(a) + total.da.dot(jerk);
      grad_T(ii) += s * total.value + w * (chain + total.dtau) * frac;
      tau_sens(ii) += w * total.dtau;
    }
  }
  // d tau_j / d T_r = 1 for every piece r before the sample's piece.
  double suffix = 0.0;
  for (std::size_t r = m; r-- > 0;) {
    grad_T(static_cast<Eigen::Index>(r)) += suffix;
    suffix += tau_sens(static_cast<Eigen::Index>(r));
  }

  std::vector<Coeffs> ctrl_c;
  Eigen::VectorXd ctrl_T;
  report.terms[kCtrl] = cost_ctrl(traj, ctrl_c, ctrl_T);
  if (lambda[kCtrl] != 0.0) {
    for (std::size_t i = 0; i < m; ++i) grad_c[i] += lambda[kCtrl] * ctrl_c[i];
    grad_T += lambda[kCtrl] * ctrl_T;
  }
  Eigen::VectorXd time_T;
  report.terms[kTime] = cost_time(traj.durations(), time_T);
  grad_T += lambda[kTime] * time_T;

  report.total = 0.0;
  for (std::size_t k = 0; k < kTermCount; ++k) report.total += lambda[k] * report.terms[k];
  const auto g = system.propagate(grad_c, grad_T);
  report.grad_q = g.waypoints;
  report.grad_T = g.durations;
  return report;
}

CostReport total_cost(const WaypointParam& param, const PlanningWorld& world, const PlannerConfig& config) {
  return total_cost(MincoSystem(param), world, config);
}

CostReport total_cost(const PiecewiseQuintic& traj, const PlanningWorld& world, const PlannerConfig& config) {
  return total_cost(MincoSystem(minco::waypoints_of(traj)), world, config);
}

namespace {

// Durations outside this band are treated as infeasible by the line search.
constexpr double kMinDuration = 1e-3;
constexpr double kMaxDuration = 1e3;

}  // namespace

OptimizeResult optimize(const WaypointParam& initial, const PlanningWorld& world, const PlannerConfig& config) {
  const std::size_t m = initial.pieces();
  if (m < 1 || initial.waypoints.size() + 1 != m) throw InvalidArgument("optimize: inconsistent initial guess");
  for (const double d : initial.durations) {
    if (!(d > 0.0)) throw InvalidArgument("optimize: initial durations must be positive");
  }
  const bool with_time = config.optimize_time;
  const auto nq = static_cast<Eigen::Index>(2 * (m - 1));
  const Eigen::Index nx = nq + (with_time ? static_cast<Eigen::Index>(m) : 0);

  Eigen::VectorXd x(nx);
  for (std::size_t i = 0; i + 1 < m; ++i) x.segment<2>(static_cast<Eigen::Index>(2 * i)) = initial.waypoints[i];
  if (with_time) {
    for (std::size_t i = 0; i < m; ++i) x(nq + static_cast<Eigen::Index>(i)) = std::log(initial.durations[i]);
  }

  WaypointParam work = initial;
  auto unpack = [&](const Eigen::VectorXd& v) {
    for (std::size_t i = 0; i + 1 < m; ++i) work.waypoints[i] = v.segment<2>(static_cast<Eigen::Index>(2 * i));
    if (with_time) {
      for (std::size_t i = 0; i < m; ++i) work.durations[i] = std::exp(v(nq + static_cast<Eigen::Index>(i)));
    }
  };
  auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    unpack(v);
    for (const double d : work.durations) {
      if (!(d >= kMinDuration && d <= kMaxDuration)) {
        grad.setZero(v.size());
        return std::numeric_limits<double>::infinity();
      }
    }
    const CostReport r = total_cost(work, world, config);
    grad.resize(v.size());
    for (std::size_t i = 0; i + 1 < m; ++i) grad.segment<2>(static_cast<Eigen::Index>(2 * i)) = r.grad_q[i];
    if (with_time) {
      for (std::size_t i = 0; i < m; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        grad(nq + ii) = r.grad_T(ii) * work.durations[i];
      }
    }
    return r.total;
  };

  OptimizeResult out;
  {
    Eigen::VectorXd g0;
    out.initial_cost = objective(x, g0);
  }
  out.solver = lbfgs::minimize(objective, x, config.lbfgs);
  unpack(x);
  out.param = work;
  const MincoSystem final_system(work);
  out.trajectory = final_system.trajectory();
  out.report = total_cost(final_system, world, config);
  return out;
}

minco::BoundaryState terminal_goal(const Vec2& slot_position, const Vec2& direction, double distance, double speed) {
  const Vec2 dir = direction.normalized();
  minco::BoundaryState goal;
  goal.position = slot_position + distance * dir;
  goal.velocity = speed * dir;
  goal.acceleration = Vec2::Zero();
  return goal;
}

Vec2 clear_of_static_obstacles(const Vec2& goal, std::span<const ObstacleModel> obstacles, double clearance) {
  Vec2 out = goal;
  // A push can land in another obstacle's zone; a few passes settle small clusters.
  for (int pass = 0; pass < 4; ++pass) {
    bool moved = false;
    for (const auto& obs : obstacles) {
      if (obs.kind() != ObstacleModel::Kind::Static) continue;
      const Vec2 c = obs.position_at(0.0);
      const double reach = obs.radius() + clearance;
      const double dx = out.x() - c.x();
      if (std::abs(dx) >= reach || (out - c).norm() >= reach) continue;
      const double half = std::sqrt(reach * reach - dx * dx);
      out.y() = out.y() >= c.y() ? c.y() + half : c.y() - half;
      moved = true;
    }
    if (!moved) break;
  }
  return out;
}

WaypointParam initial_straight(const minco::BoundaryState& start, const minco::BoundaryState& goal,
                               const PlannerConfig& config) {
  WaypointParam p;
  p.head = start;
  p.tail = goal;
  const int m = config.M;
  for (int i = 1; i < m; ++i) {
    const double s = static_cast<double>(i) / m;
    p.waypoints.push_back((1.0 - s) * start.position + s * goal.position);
  }
  p.durations.assign(static_cast<std::size_t>(m), config.nominal_duration);
  return p;
}

WaypointParam initial_from_previous(const PiecewiseQuintic& previous, double elapsed, const minco::BoundaryState& start,
                                    const minco::BoundaryState& goal, const PlannerConfig& config) {
  WaypointParam p;
  p.head = start;
  p.tail = goal;
  const int m = config.M;
  // Same piece count: keep the time allocation and shift it by `elapsed`.
  // Otherwise (a braking or seed trajectory) sample at nominal durations.
  if (previous.pieces() == static_cast<std::size_t>(m)) {
    p.durations = previous.durations();
  } else {
    p.durations.assign(static_cast<std::size_t>(m), config.nominal_duration);
  }
  double t = elapsed;
  for (int i = 1; i < m; ++i) {
    t += p.durations[static_cast<std::size_t>(i - 1)];
    p.waypoints.push_back(previous.extrapolate(t));
  }
  return p;
}

std::optional<WaypointParam> initial_from_path(std::span<const Vec2> path, const minco::BoundaryState& start,
                                               const minco::BoundaryState& goal, const PlannerConfig& config) {
  if (path.size() < 2) return std::nullopt;
  std::vector<double> cumulative{0.0};
  for (std::size_t k = 1; k < path.size(); ++k) cumulative.push_back(cumulative.back() + (path[k] - path[k - 1]).norm());
  const double length = cumulative.back();
  if (!(length > 1e-6)) return std::nullopt;

  const int m = config.M;
  auto point_at = [&](double s) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::distance(cumulative.begin(), it)),
                                                path.size() - 1);
    const std::size_t a = k - 1;
    const double seg = cumulative[k] - cumulative[a];
    const double u = seg > 0.0 ? std::clamp((s - cumulative[a]) / seg, 0.0, 1.0) : 0.0;
    return Vec2(path[a] + u * (path[k] - path[a]));
  };

  WaypointParam p;
  p.head = start;
  p.tail = goal;
  std::vector<Vec2> anchors{start.position};
  for (int i = 1; i < m; ++i) anchors.push_back(point_at(length * i / m));
  anchors.push_back(goal.position);
  for (int i = 1; i < m; ++i) p.waypoints.push_back(anchors[static_cast<std::size_t>(i)]);
  const double v_ref = config.v_ref();
  const double floor = kMinDuration * 10.0;
  for (int i = 0; i < m; ++i) {
    // Arc length along the path for interior segments; the last one ends at the goal.
    const double seg = i + 1 < m ? length / m
                                 : (anchors[static_cast<std::size_t>(m)] - anchors[static_cast<std::size_t>(m - 1)]).norm();
    p.durations.push_back(std::max(seg / v_ref, floor));
  }
  return p;
}

PlanResult plan_cycle(const PlanRequest& request, const PlanningWorld& world, const PlannerConfig& config) {
  PlanResult result;
  minco::BoundaryState start = request.start;
  if (!is_finite(start.position) || !is_finite(start.velocity) || !is_finite(start.acceleration)) {
    throw InvalidArgument("plan_cycle: non-finite start state");
  }
  const double speed = start.velocity.norm();
  if (speed > config.v_max * config.boundary_speed_tolerance) {
    start.velocity *= config.v_max / speed;
    result.warnings.push_back("start speed " + std::to_string(speed) + " m/s clamped to v_max");
  }

  // Priority: transition route, then the shifted previous plan, then a straight line.
  std::optional<WaypointParam> init;
  if (!request.grid_path.empty()) {
    init = initial_from_path(request.grid_path, start, request.goal, config);
    if (init) {
      result.init = PlanResult::Init::GridPath;
    } else {
      result.warnings.push_back("degenerate grid path, falling back");
    }
  }
  if (!init && request.previous != nullptr && !request.previous->empty()) {
    init = initial_from_previous(*request.previous, request.now - request.previous_start, start, request.goal, config);
    result.init = PlanResult::Init::Previous;
  }
  if (!init) {
    init = initial_straight(start, request.goal, config);
    result.init = PlanResult::Init::Straight;
  }
  if (!config.optimize_time) init->durations.assign(init->durations.size(), config.nominal_duration);

  PlanningWorld w = world;
  w.start_time = request.now;
  auto opt = optimize(*init, w, config);
  if (opt.warning()) result.warnings.push_back(std::string("optimizer: ") + lbfgs::to_string(opt.solver.status));
  result.trajectory = std::move(opt.trajectory);
  result.report = std::move(opt.report);
  result.initial_cost = opt.initial_cost;
  result.solver = opt.solver;
  return result;
}

}  // namespace react::jstp
