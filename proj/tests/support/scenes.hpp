#pragma once

#include "oracles.hpp"

#include "react/jstp.hpp"

#include <memory>

namespace oracle {

/// A randomized planning instance that owns everything PlanningWorld points to.
struct RandomScene {
  react::minco::WaypointParam param;
  std::vector<react::ObstacleModel> obstacles;
  std::vector<react::Broadcast> broadcasts;
  react::formation::FormationMatrices desired;
  react::jstp::PlannerConfig config;
  react::jstp::PlanningWorld world;
  bool has_formation = false;

  void bind() {
    world.obstacles = obstacles;
    world.broadcasts = broadcasts;
    world.desired = has_formation ? &desired : nullptr;
  }
};

/// Ego trajectory heading along +x from the origin; obstacles and neighbours
/// are placed close enough to the path that their penalties are active.
inline std::unique_ptr<RandomScene> random_scene(std::mt19937_64& rng, int pieces, int K, int n_obstacles,
                                                 int n_neighbors) {
  using namespace react;
  auto scene = std::make_unique<RandomScene>();
  auto& cfg = scene->config;
  cfg.K = K;
  cfg.M = pieces;
  cfg.v_max = uniform(rng, 0.3, 0.8);
  cfg.a_max = uniform(rng, 0.3, 1.0);
  cfg.delta_max = uniform(rng, 0.2, 0.6);
  cfg.d_thr_obs = uniform(rng, 0.3, 0.8);
  cfg.d_thr_wmr = uniform(rng, 0.5, 1.2);
  cfg.b = uniform(rng, 0.3, 0.9);
  cfg.a = uniform(rng, 0.5, 2.0);

  auto& p = scene->param;
  const double speed = uniform(rng, 0.3, 0.9);
  double x = 0.0;
  // Resample ego plans that nearly stall: curvature blows up there and the
  // cost becomes too nonlinear for a fixed-step difference to resolve.
  for (int attempt = 0;; ++attempt) {
    p = {};
    x = 0.0;
    p.head = {Vec2(0, uniform(rng, -0.2, 0.2)), Vec2(speed, uniform(rng, -0.2, 0.2)), uniform_vec(rng, -0.3, 0.3)};
    for (int i = 0; i < pieces; ++i) {
      const double d = uniform(rng, 0.4, 1.2);
      p.durations.push_back(d);
      x += speed * d;
      if (i + 1 < pieces) p.waypoints.emplace_back(x + uniform(rng, -0.2, 0.2), uniform(rng, -0.5, 0.5));
    }
    p.tail = {Vec2(x, uniform(rng, -0.3, 0.3)), Vec2(speed, 0), Vec2::Zero()};
    const auto ego = minco::construct(p);
    double slowest = std::numeric_limits<double>::infinity();
    for (double t = 0.0; t <= ego.total_duration(); t += 0.01) slowest = std::min(slowest, ego.evaluate(t, 1).norm());
    if (slowest > 0.1 || attempt > 50) break;
  }
  const double horizon = x;

  for (int k = 0; k < n_obstacles; ++k) {
    const Vec2 c(uniform(rng, 0.0, horizon), uniform(rng, -0.6, 0.6));
    const double r = uniform(rng, 0.05, 0.3);
    if (uniform(rng, 0, 1) < 0.5) {
      scene->obstacles.push_back(ObstacleModel::fixed(c, r));
    } else {
      std::vector<TimedPoint> path;
      double t = uniform(rng, -1.0, 0.5);
      Vec2 q = c;
      for (int s = 0; s < 3; ++s) {
        path.push_back({t, q});
        t += uniform(rng, 0.7, 2.0);
        q += uniform_vec(rng, -0.6, 0.6);
      }
      scene->obstacles.push_back(ObstacleModel::moving(path, r));
    }
  }

  scene->world.ego_id = n_neighbors > 0 ? uniform_int(rng, 0, n_neighbors) : 0;
  scene->world.start_time = uniform(rng, 0.0, 3.0);
  std::vector<Vec2> desired_positions(static_cast<std::size_t>(n_neighbors + 1));
  int id = 0;
  for (int l = 0; l < n_neighbors; ++l, ++id) {
    if (id == scene->world.ego_id) ++id;
    minco::WaypointParam np;
    const Vec2 offset(uniform(rng, -0.8, 0.8), uniform(rng, -0.8, 0.8));
    const int m = uniform_int(rng, 1, 4);
    double nx = 0.0;
    np.head = {offset, Vec2(speed, 0) + uniform_vec(rng, -0.2, 0.2), Vec2::Zero()};
    // Some neighbour plans end before the ego horizon to exercise clamping.
    const double span = uniform(rng, 0.5, 1.5) * horizon / speed;
    for (int i = 0; i < m; ++i) {
      np.durations.push_back(span / m);
      nx += speed * span / m;
      if (i + 1 < m) np.waypoints.push_back(offset + Vec2(nx, uniform(rng, -0.3, 0.3)));
    }
    np.tail = {offset + Vec2(nx, uniform(rng, -0.3, 0.3)), Vec2(speed, 0), Vec2::Zero()};
    Broadcast b;
    b.robot_id = id;
    b.trajectory = minco::construct(np);
    b.start_time = scene->world.start_time + uniform(rng, -0.5, 0.3);
    scene->broadcasts.push_back(std::move(b));
    desired_positions[static_cast<std::size_t>(id)] = offset + uniform_vec(rng, -0.2, 0.2);
  }
  if (n_neighbors > 0) {
    desired_positions[static_cast<std::size_t>(scene->world.ego_id)] = uniform_vec(rng, -0.3, 0.3);
    scene->world.formation_weights = {cfg.a, false};
    scene->desired = formation::build_matrices(desired_positions, scene->world.formation_weights);
    scene->has_formation = true;
  }
  // A broadcast of the ego itself must be ignored.
  Broadcast self;
  self.robot_id = scene->world.ego_id;
  self.trajectory = minco::construct(p);
  self.start_time = scene->world.start_time;
  scene->broadcasts.push_back(std::move(self));
  scene->bind();
  return scene;
}

inline Eigen::VectorXd pack_qt(const react::minco::WaypointParam& p) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(2 * p.waypoints.size() + p.durations.size()));
  Eigen::Index k = 0;
  for (const auto& w : p.waypoints) {
    x(k++) = w.x();
    x(k++) = w.y();
  }
  for (const double d : p.durations) x(k++) = d;
  return x;
}

inline react::minco::WaypointParam unpack_qt(const react::minco::WaypointParam& base, const Eigen::VectorXd& x) {
  auto p = base;
  Eigen::Index k = 0;
  for (auto& w : p.waypoints) {
    w.x() = x(k++);
    w.y() = x(k++);
  }
  for (auto& d : p.durations) d = x(k++);
  return p;
}

inline Eigen::VectorXd pack_gradient(const react::jstp::CostReport& r) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(2 * r.grad_q.size()) + r.grad_T.size());
  Eigen::Index k = 0;
  for (const auto& w : r.grad_q) {
    g(k++) = w.x();
    g(k++) = w.y();
  }
  for (Eigen::Index i = 0; i < r.grad_T.size(); ++i) g(k++) = r.grad_T(i);
  return g;
}

struct GradientCheck {
  double worst_relative = 0.0;
  int failures = 0;
  int checked = 0;
};

/// Compares total_cost's (grad_q, grad_T) with central differences under `config`.
inline GradientCheck check_gradient(const RandomScene& scene, const react::jstp::PlannerConfig& config) {
  GradientCheck out;
  const auto report = react::jstp::total_cost(scene.param, scene.world, config);
  const Eigen::VectorXd analytic = pack_gradient(report);
  const Eigen::VectorXd x0 = pack_qt(scene.param);
  auto f = [&](const Eigen::VectorXd& x) { return react::jstp::total_cost(unpack_qt(scene.param, x), scene.world, config).total; };
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    const double fd = central_difference(f, x0, static_cast<int>(i));
    ++out.checked;
    if (!gradient_close(analytic(i), fd)) {
      ++out.failures;
      out.worst_relative = std::max(out.worst_relative, relative_error(analytic(i), fd));
    }
  }
  return out;
}

}  // namespace oracle
