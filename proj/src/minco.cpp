#include "react/minco.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace react::minco {

BandedSystem::BandedSystem(int n, int lower, int upper)
    : n_(n), lower_(lower), upper_(upper), data_(static_cast<std::size_t>(n * (lower + upper + 1)), 0.0) {}

void BandedSystem::reset() { std::fill(data_.begin(), data_.end(), 0.0); }

void BandedSystem::factorize() {
  for (int k = 0; k + 1 < n_; ++k) {
    const int i_end = std::min(k + lower_, n_ - 1);
    const double pivot = (*this)(k, k);
    if (pivot == 0.0) throw Error("BandedSystem: zero pivot at row " + std::to_string(k));
    for (int i = k + 1; i <= i_end; ++i) {
      if ((*this)(i, k) != 0.0) (*this)(i, k) /= pivot;
    }
    const int j_end = std::min(k + upper_, n_ - 1);
    for (int j = k + 1; j <= j_end; ++j) {
      const double u = (*this)(k, j);
      if (u == 0.0) continue;
      for (int i = k + 1; i <= i_end; ++i) {
        const double l = (*this)(i, k);
        if (l != 0.0) (*this)(i, j) -= l * u;
      }
    }
  }
}

void BandedSystem::solve(Eigen::MatrixXd& b) const {
  for (int j = 0; j < n_; ++j) {
    const int i_end = std::min(j + lower_, n_ - 1);
    for (int i = j + 1; i <= i_end; ++i) {
      const double l = (*this)(i, j);
      if (l != 0.0) b.row(i) -= l * b.row(j);
    }
  }
  for (int j = n_ - 1; j >= 0; --j) {
    b.row(j) /= (*this)(j, j);
    const int i_begin = std::max(0, j - upper_);
    for (int i = i_begin; i < j; ++i) {
      const double u = (*this)(i, j);
      if (u != 0.0) b.row(i) -= u * b.row(j);
    }
  }
}

void BandedSystem::solve_transposed(Eigen::MatrixXd& b) const {
  // (LU)^T x = U^T L^T x = b.
  for (int j = 0; j < n_; ++j) {
    b.row(j) /= (*this)(j, j);
    const int i_end = std::min(j + upper_, n_ - 1);
    for (int i = j + 1; i <= i_end; ++i) {
      const double u = (*this)(j, i);
      if (u != 0.0) b.row(i) -= u * b.row(j);
    }
  }
  for (int j = n_ - 1; j >= 0; --j) {
    const int i_begin = std::max(0, j - lower_);
    for (int i = i_begin; i < j; ++i) {
      const double l = (*this)(j, i);
      if (l != 0.0) b.row(i) -= l * b.row(j);
    }
  }
}

Eigen::Matrix<double, 6, 1> basis(double t, int order) {
  Eigen::Matrix<double, 6, 1> beta = Eigen::Matrix<double, 6, 1>::Zero();
  for (int k = order; k < 6; ++k) {
    double factor = 1.0;
    for (int m = 0; m < order; ++m) factor *= static_cast<double>(k - m);
    beta(k) = factor * std::pow(t, k - order);
  }
  return beta;
}

PiecewiseQuintic::PiecewiseQuintic(std::vector<double> durations, std::vector<Coeffs> coefficients)
    : durations_(std::move(durations)), coeffs_(std::move(coefficients)) {
  if (durations_.size() != coeffs_.size()) throw InvalidArgument("PiecewiseQuintic: size mismatch");
  if (durations_.empty()) throw InvalidArgument("PiecewiseQuintic: at least one piece required");
  starts_.reserve(durations_.size());
  for (const double d : durations_) {
    if (!(d > 0.0)) throw InvalidArgument("PiecewiseQuintic: durations must be positive");
    starts_.push_back(total_);
    total_ += d;
  }
}

std::size_t PiecewiseQuintic::locate(double t) const {
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  if (it == starts_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
}

Vec2 PiecewiseQuintic::piece_value(std::size_t i, double t, int order) const {
  return coeffs_[i].transpose() * basis(t, order);
}

Vec2 PiecewiseQuintic::evaluate(double t, int order) const {
  if (empty()) throw Error("evaluate: empty trajectory");
  const double slack = 1e-12 * std::max(1.0, total_);
  if (!(t >= -slack && t <= total_ + slack)) {
    throw InvalidArgument("evaluate: t=" + std::to_string(t) + " outside [0, " + std::to_string(total_) + "]");
  }
  if (order < 0 || order > 5) throw InvalidArgument("evaluate: derivative order must be 0..5");
  t = std::clamp(t, 0.0, total_);
  const std::size_t i = locate(t);
  return piece_value(i, t - starts_[i], order);
}

Vec2 PiecewiseQuintic::evaluate_clamped(double t, int order) const {
  if (t <= 0.0) return order == 0 ? evaluate(0.0, 0) : (t == 0.0 ? evaluate(0.0, order) : Vec2::Zero());
  if (t >= total_) return order == 0 ? evaluate(total_, 0) : (t == total_ ? evaluate(total_, order) : Vec2::Zero());
  return evaluate(t, order);
}

Vec2 PiecewiseQuintic::extrapolate(double t) const {
  if (t <= total_) return evaluate(std::max(t, 0.0), 0);
  return evaluate(total_, 0) + (t - total_) * evaluate(total_, 1);
}

BoundaryState PiecewiseQuintic::start_state() const {
  return {evaluate(0.0, 0), evaluate(0.0, 1), evaluate(0.0, 2)};
}

BoundaryState PiecewiseQuintic::end_state() const {
  return {evaluate(total_, 0), evaluate(total_, 1), evaluate(total_, 2)};
}

void MincoSystem::solve(const WaypointParam& param) {
  const std::size_t m = param.pieces();
  if (m < 1) throw InvalidArgument("MINCO: at least one piece required");
  if (param.waypoints.size() + 1 != m) {
    throw InvalidArgument("MINCO: " + std::to_string(m) + " pieces need " + std::to_string(m - 1) + " waypoints");
  }
  for (const double d : param.durations) {
    if (!(d > 0.0) || !std::isfinite(d)) throw InvalidArgument("MINCO: durations must be positive and finite");
  }
  pieces_ = m;
  const int n = static_cast<int>(6 * m);
  system_ = BandedSystem(n, 6, 6);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
  auto& a = system_;

  a(0, 0) = 1.0;
  a(1, 1) = 1.0;
  a(2, 2) = 2.0;
  rhs.row(0) = param.head.position.transpose();
  rhs.row(1) = param.head.velocity.transpose();
  rhs.row(2) = param.head.acceleration.transpose();

  for (int i = 0; i + 1 < static_cast<int>(m); ++i) {
    const double t1 = param.durations[static_cast<std::size_t>(i)];
    const double t2 = t1 * t1;
    const double t3 = t2 * t1;
    const double t4 = t2 * t2;
    const double t5 = t4 * t1;
    const int r = 6 * i;
    // jerk and snap continuity
    a(r + 3, r + 3) = 6.0;
    a(r + 3, r + 4) = 24.0 * t1;
    a(r + 3, r + 5) = 60.0 * t2;
    a(r + 3, r + 9) = -6.0;
    a(r + 4, r + 4) = 24.0;
    a(r + 4, r + 5) = 120.0 * t1;
    a(r + 4, r + 10) = -24.0;
    // waypoint
    a(r + 5, r + 0) = 1.0;
    a(r + 5, r + 1) = t1;
    a(r + 5, r + 2) = t2;
    a(r + 5, r + 3) = t3;
    a(r + 5, r + 4) = t4;
    a(r + 5, r + 5) = t5;
    // position, velocity, acceleration continuity
    a(r + 6, r + 0) = 1.0;
    a(r + 6, r + 1) = t1;
    a(r + 6, r + 2) = t2;
    a(r + 6, r + 3) = t3;
    a(r + 6, r + 4) = t4;
    a(r + 6, r + 5) = t5;
    a(r + 6, r + 6) = -1.0;
    a(r + 7, r + 1) = 1.0;
    a(r + 7, r + 2) = 2.0 * t1;
    a(r + 7, r + 3) = 3.0 * t2;
    a(r + 7, r + 4) = 4.0 * t3;
    a(r + 7, r + 5) = 5.0 * t4;
    a(r + 7, r + 7) = -1.0;
    a(r + 8, r + 2) = 2.0;
    a(r + 8, r + 3) = 6.0 * t1;
    a(r + 8, r + 4) = 12.0 * t2;
    a(r + 8, r + 5) = 20.0 * t3;
    a(r + 8, r + 8) = -2.0;
    rhs.row(r + 5) = param.waypoints[static_cast<std::size_t>(i)].transpose();
  }

  const double t1 = param.durations.back();
  const double t2 = t1 * t1;
  const double t3 = t2 * t1;
  const double t4 = t2 * t2;
  const double t5 = t4 * t1;
  const int r = n - 6;
  a(n - 3, r + 0) = 1.0;
  a(n - 3, r + 1) = t1;
  a(n - 3, r + 2) = t2;
  a(n - 3, r + 3) = t3;
  a(n - 3, r + 4) = t4;
  a(n - 3, r + 5) = t5;
  a(n - 2, r + 1) = 1.0;
  a(n - 2, r + 2) = 2.0 * t1;
  a(n - 2, r + 3) = 3.0 * t2;
  a(n - 2, r + 4) = 4.0 * t3;
  a(n - 2, r + 5) = 5.0 * t4;
  a(n - 1, r + 2) = 2.0;
  a(n - 1, r + 3) = 6.0 * t1;
  a(n - 1, r + 4) = 12.0 * t2;
  a(n - 1, r + 5) = 20.0 * t3;
  rhs.row(n - 3) = param.tail.position.transpose();
  rhs.row(n - 2) = param.tail.velocity.transpose();
  rhs.row(n - 1) = param.tail.acceleration.transpose();

  system_.factorize();
  system_.solve(rhs);

  std::vector<Coeffs> coeffs(m);
  for (std::size_t i = 0; i < m; ++i) coeffs[i] = rhs.block<6, 2>(static_cast<Eigen::Index>(6 * i), 0);
  trajectory_ = PiecewiseQuintic(param.durations, std::move(coeffs));
}

ParamGradient MincoSystem::propagate(std::span<const Coeffs> grad_coeffs, const Eigen::VectorXd& grad_durations) const {
  const std::size_t m = pieces_;
  if (grad_coeffs.size() != m || static_cast<std::size_t>(grad_durations.size()) != m) {
    throw InvalidArgument("propagate: gradient dimensions do not match the trajectory");
  }
  const int n = static_cast<int>(6 * m);
  Eigen::MatrixXd adjoint(n, 2);
  for (std::size_t i = 0; i < m; ++i) adjoint.block<6, 2>(static_cast<Eigen::Index>(6 * i), 0) = grad_coeffs[i];
  system_.solve_transposed(adjoint);

  ParamGradient out;
  out.waypoints.resize(m - 1);
  out.durations = grad_durations;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    out.waypoints[i] = adjoint.row(static_cast<Eigen::Index>(6 * i + 5)).transpose();
  }
  // dJ/dT_i -= adjoint^T (dA/dT_i) c, using the rows that contain T_i.
  for (std::size_t i = 0; i < m; ++i) {
    const double t = trajectory_.duration(i);
    const auto r = static_cast<Eigen::Index>(6 * i);
    const Vec2 vel = trajectory_.piece_value(i, t, 1);
    const Vec2 acc = trajectory_.piece_value(i, t, 2);
    const Vec2 jerk = trajectory_.piece_value(i, t, 3);
    double g = 0.0;
    if (i + 1 < m) {
      const Vec2 snap = trajectory_.piece_value(i, t, 4);
      const Vec2 crackle = trajectory_.piece_value(i, t, 5);
      g += adjoint.row(r + 3).dot(snap.transpose());
      g += adjoint.row(r + 4).dot(crackle.transpose());
      g += adjoint.row(r + 5).dot(vel.transpose());
      g += adjoint.row(r + 6).dot(vel.transpose());
      g += adjoint.row(r + 7).dot(acc.transpose());
      g += adjoint.row(r + 8).dot(jerk.transpose());
    } else {
      g += adjoint.row(n - 3).dot(vel.transpose());
      g += adjoint.row(n - 2).dot(acc.transpose());
      g += adjoint.row(n - 1).dot(jerk.transpose());
    }
    out.durations(static_cast<Eigen::Index>(i)) -= g;
  }
  return out;
}

PiecewiseQuintic construct(const WaypointParam& param) { return MincoSystem(param).trajectory(); }

WaypointParam waypoints_of(const PiecewiseQuintic& trajectory) {
  WaypointParam param;
  param.durations = trajectory.durations();
  param.head = trajectory.start_state();
  param.tail = trajectory.end_state();
  for (std::size_t i = 0; i + 1 < trajectory.pieces(); ++i) {
    param.waypoints.push_back(trajectory.piece_value(i, trajectory.duration(i), 0));
  }
  return param;
}

ParamGradient backpropagate(const PiecewiseQuintic& trajectory, std::span<const Coeffs> grad_coeffs,
                            const Eigen::VectorXd& grad_durations) {
  return MincoSystem(waypoints_of(trajectory)).propagate(grad_coeffs, grad_durations);
}

double jerk_energy(const PiecewiseQuintic& trajectory) {
  double energy = 0.0;
  for (std::size_t i = 0; i < trajectory.pieces(); ++i) {
    const auto& c = trajectory.coeffs(i);
    const double t1 = trajectory.duration(i);
    const double t2 = t1 * t1;
    const double t3 = t2 * t1;
    const double t4 = t2 * t2;
    const double t5 = t4 * t1;
    energy += 36.0 * c.row(3).squaredNorm() * t1 + 144.0 * c.row(4).dot(c.row(3)) * t2 +
              192.0 * c.row(4).squaredNorm() * t3 + 240.0 * c.row(5).dot(c.row(3)) * t3 +
              720.0 * c.row(5).dot(c.row(4)) * t4 + 720.0 * c.row(5).squaredNorm() * t5;
  }
  return energy;
}

void jerk_energy_gradient(const PiecewiseQuintic& trajectory, std::vector<Coeffs>& grad_coeffs,
                          Eigen::VectorXd& grad_durations) {
  const std::size_t m = trajectory.pieces();
  grad_coeffs.assign(m, Coeffs::Zero());
  grad_durations = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const auto& c = trajectory.coeffs(i);
    const double t1 = trajectory.duration(i);
    const double t2 = t1 * t1;
    const double t3 = t2 * t1;
    const double t4 = t2 * t2;
    const double t5 = t4 * t1;
    auto& g = grad_coeffs[i];
    g.row(3) = 72.0 * c.row(3) * t1 + 144.0 * c.row(4) * t2 + 240.0 * c.row(5) * t3;
    g.row(4) = 144.0 * c.row(3) * t2 + 384.0 * c.row(4) * t3 + 720.0 * c.row(5) * t4;
    g.row(5) = 240.0 * c.row(3) * t3 + 720.0 * c.row(4) * t4 + 1440.0 * c.row(5) * t5;
    grad_durations(static_cast<Eigen::Index>(i)) =
        36.0 * c.row(3).squaredNorm() + 288.0 * c.row(4).dot(c.row(3)) * t1 + 576.0 * c.row(4).squaredNorm() * t2 +
        720.0 * c.row(5).dot(c.row(3)) * t2 + 2880.0 * c.row(5).dot(c.row(4)) * t3 +
        3600.0 * c.row(5).squaredNorm() * t4;
  }
}

}  // namespace react::minco
