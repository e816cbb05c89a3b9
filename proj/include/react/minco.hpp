#pragma once

#include "react/common.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace react::minco {

/// Banded matrix with in-place LU factorisation (no pivoting).
/// Storage follows the usual band layout: A(i, j) lives at (i - j + upper) * n + j.
class BandedSystem {
 public:
  BandedSystem() = default;
  BandedSystem(int n, int lower, int upper);

  void reset();
  int size() const { return n_; }

  double operator()(int i, int j) const { return data_[static_cast<std::size_t>((i - j + upper_) * n_ + j)]; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>((i - j + upper_) * n_ + j)]; }

  void factorize();
  /// Solves A x = b in place, one column per right-hand side.
  void solve(Eigen::MatrixXd& b) const;
  /// Solves A^T x = b in place.
  void solve_transposed(Eigen::MatrixXd& b) const;

 private:
  int n_ = 0;
  int lower_ = 0;
  int upper_ = 0;
  std::vector<double> data_;
};

/// Position, velocity and acceleration at one end of a trajectory.
struct BoundaryState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  Vec2 acceleration = Vec2::Zero();
};

/// Coefficients of one quintic piece: row k multiplies t^k.
using Coeffs = Eigen::Matrix<double, 6, 2>;

class PiecewiseQuintic {
 public:
  PiecewiseQuintic() = default;
  PiecewiseQuintic(std::vector<double> durations, std::vector<Coeffs> coefficients);

  std::size_t pieces() const { return durations_.size(); }
  bool empty() const { return durations_.empty(); }
  double duration(std::size_t i) const { return durations_[i]; }
  const std::vector<double>& durations() const { return durations_; }
  const Coeffs& coeffs(std::size_t i) const { return coeffs_[i]; }
  const std::vector<Coeffs>& coefficients() const { return coeffs_; }
  double total_duration() const { return total_; }
  /// Global start time of piece i relative to the trajectory start.
  double piece_start(std::size_t i) const { return starts_[i]; }

  /// Piece containing t (right-open, the final instant belongs to the last piece).
  std::size_t locate(double t) const;

  /// Derivative of the given order at t in [0, total_duration()].
  Vec2 evaluate(double t, int order = 0) const;
  /// evaluate() on the clamped time; derivatives vanish outside [0, T].
  Vec2 evaluate_clamped(double t, int order = 0) const;
  /// Continues past the end with the terminal velocity.
  Vec2 extrapolate(double t) const;

  /// Derivative of piece i at its local time t.
  Vec2 piece_value(std::size_t i, double t, int order) const;

  BoundaryState start_state() const;
  BoundaryState end_state() const;

 private:
  std::vector<double> durations_;
  std::vector<double> starts_;
  std::vector<Coeffs> coeffs_;
  double total_ = 0.0;
};

/// Basis row beta^(order)(t) = d^order/dt^order [1, t, ..., t^5].
Eigen::Matrix<double, 6, 1> basis(double t, int order);

/// Intermediate waypoints plus durations; M pieces need M-1 waypoints.
struct WaypointParam {
  std::vector<Vec2> waypoints;
  std::vector<double> durations;
  BoundaryState head;
  BoundaryState tail;

  std::size_t pieces() const { return durations.size(); }
};

struct ParamGradient {
  std::vector<Vec2> waypoints;
  Eigen::VectorXd durations;
};

/// Minimum-jerk trajectory through (q, T) with the factorised banded system
/// kept for gradient propagation.
class MincoSystem {
 public:
  MincoSystem() = default;
  explicit MincoSystem(const WaypointParam& param) { solve(param); }

  /// Builds and solves the 6M x 6M continuity system.
  void solve(const WaypointParam& param);

  const PiecewiseQuintic& trajectory() const { return trajectory_; }
  std::size_t pieces() const { return pieces_; }

  /// Maps dJ/dc and the explicit dJ/dT onto dJ/dq and total dJ/dT.
  ParamGradient propagate(std::span<const Coeffs> grad_coeffs, const Eigen::VectorXd& grad_durations) const;

 private:
  std::size_t pieces_ = 0;
  BandedSystem system_;
  PiecewiseQuintic trajectory_;
};

PiecewiseQuintic construct(const WaypointParam& param);
WaypointParam waypoints_of(const PiecewiseQuintic& trajectory);

/// Back-propagation through c = M(q, T); refactorises the system of `trajectory`.
ParamGradient backpropagate(const PiecewiseQuintic& trajectory, std::span<const Coeffs> grad_coeffs,
                            const Eigen::VectorXd& grad_durations);

/// Integral of ||d^3 p / dt^3||^2 over the whole trajectory.
double jerk_energy(const PiecewiseQuintic& trajectory);
/// Partial derivatives of jerk_energy with respect to coefficients and durations.
void jerk_energy_gradient(const PiecewiseQuintic& trajectory, std::vector<Coeffs>& grad_coeffs,
                          Eigen::VectorXd& grad_durations);

}  // namespace react::minco
