#include "react/world.hpp"

#include <algorithm>

namespace react {

ObstacleModel ObstacleModel::fixed(const Vec2& center, double radius) {
  if (!(radius >= 0.0)) throw InvalidArgument("obstacle radius must be nonnegative");
  if (!is_finite(center)) throw InvalidArgument("obstacle center must be finite");
  ObstacleModel o;
  o.kind_ = Kind::Static;
  o.radius_ = radius;
  o.path_ = {TimedPoint{0.0, center}};
  return o;
}

ObstacleModel ObstacleModel::moving(std::vector<TimedPoint> path, double radius) {
  if (!(radius >= 0.0)) throw InvalidArgument("obstacle radius must be nonnegative");
  if (path.empty()) throw InvalidArgument("dynamic obstacle needs at least one timed point");
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (!(path[i].t > path[i - 1].t)) throw InvalidArgument("dynamic obstacle timestamps must increase");
  }
  ObstacleModel o;
  o.kind_ = Kind::Dynamic;
  o.radius_ = radius;
  o.path_ = std::move(path);
  return o;
}

namespace {

// Index of the segment [i, i+1] containing t; assumes path_.size() >= 2
// and t strictly inside the scripted interval.
std::size_t segment_of(const std::vector<TimedPoint>& path, double t) {
  const auto it = std::upper_bound(path.begin(), path.end(), t, [](double v, const TimedPoint& p) { return v < p.t; });
  return static_cast<std::size_t>(std::distance(path.begin(), it)) - 1;
}

}  // namespace

Vec2 ObstacleModel::position_at(double t) const {
  if (path_.size() == 1 || t <= path_.front().t) return path_.front().p;
  if (t >= path_.back().t) return path_.back().p;
  const std::size_t i = segment_of(path_, t);
  const auto& a = path_[i];
  const auto& b = path_[i + 1];
  const double s = (t - a.t) / (b.t - a.t);
  return a.p + s * (b.p - a.p);
}

Vec2 ObstacleModel::velocity_at(double t) const {
  if (path_.size() == 1 || t < path_.front().t || t >= path_.back().t) return Vec2::Zero();
  const std::size_t i = segment_of(path_, t);
  const auto& a = path_[i];
  const auto& b = path_[i + 1];
  return (b.p - a.p) / (b.t - a.t);
}

}  // namespace react
