#pragma once

#include "react/common.hpp"
#include "react/minco.hpp"

#include <vector>

namespace react {

struct TimedPoint {
  double t = 0.0;
  Vec2 p = Vec2::Zero();
};

/// Circular obstacle: fixed, or moving along a piecewise-linear timed path
/// that holds its end points outside the scripted interval.
class ObstacleModel {
 public:
  enum class Kind { Static, Dynamic };

  static ObstacleModel fixed(const Vec2& center, double radius);
  static ObstacleModel moving(std::vector<TimedPoint> path, double radius);

  Kind kind() const { return kind_; }
  double radius() const { return radius_; }
  const std::vector<TimedPoint>& path() const { return path_; }
  double horizon() const { return path_.back().t; }

  Vec2 position_at(double global_time) const;
  Vec2 velocity_at(double global_time) const;

 private:
  Kind kind_ = Kind::Static;
  double radius_ = 0.0;
  std::vector<TimedPoint> path_;
};

/// A robot's latest broadcast plan.
struct Broadcast {
  int robot_id = 0;
  minco::PiecewiseQuintic trajectory;
  /// Global time of trajectory t = 0.
  double start_time = 0.0;

  /// Queries past either end clamp to the end point with zero velocity.
  Vec2 position_at(double global_time) const { return trajectory.evaluate_clamped(global_time - start_time, 0); }
  Vec2 velocity_at(double global_time) const { return trajectory.evaluate_clamped(global_time - start_time, 1); }
  double end_time() const { return start_time + trajectory.total_duration(); }
};

}  // namespace react
