#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include "react/minco.hpp"
#include "react/tcf_r2t.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using react::Vec2;
using react::minco::Coeffs;
using react::minco::WaypointParam;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline Vec2 uniform_vec(std::mt19937_64& rng, double lo, double hi) { return Vec2(uniform(rng, lo, hi), uniform(rng, lo, hi)); }

inline WaypointParam random_param(std::mt19937_64& rng, int pieces, double t_lo = 0.1, double t_hi = 5.0) {
  WaypointParam p;
  p.head = {uniform_vec(rng, -2, 2), uniform_vec(rng, -1, 1), uniform_vec(rng, -1, 1)};
  p.tail = {uniform_vec(rng, 3, 6), uniform_vec(rng, -1, 1), uniform_vec(rng, -1, 1)};
  for (int i = 0; i < pieces; ++i) p.durations.push_back(uniform(rng, t_lo, t_hi));
  for (int i = 1; i < pieces; ++i) p.waypoints.push_back(uniform_vec(rng, -3, 6));
  return p;
}

/// Jerk Gram matrix of one piece: Q(k, l) = int_0^T beta'''_k beta'''_l dt.
inline Eigen::Matrix<double, 6, 6> jerk_gram(double duration) {
  Eigen::Matrix<double, 6, 6> q = Eigen::Matrix<double, 6, 6>::Zero();
  for (int k = 3; k < 6; ++k) {
    for (int l = 3; l < 6; ++l) {
      const double ck = k * (k - 1) * (k - 2);
      const double cl = l * (l - 1) * (l - 2);
      const int power = k + l - 5;
      q(k, l) = ck * cl * std::pow(duration, power) / power;
    }
  }
  return q;
}

/// Minimum-jerk coefficients from a dense equality-constrained quadratic
/// program: boundary states, waypoint positions, and C^2 joints. Continuity
/// of orders 3 and 4 is not imposed; it has to come out of the optimum.
inline std::vector<Coeffs> dense_min_jerk(const WaypointParam& p) {
  const int m = static_cast<int>(p.pieces());
  const int n = 6 * m;
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<Vec2> rhs;
  auto row_for = [&](int piece, double t, int order) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
    r.segment<6>(6 * piece) = react::minco::basis(t, order).transpose();
    return r;
  };
  const Vec2 head[3] = {p.head.position, p.head.velocity, p.head.acceleration};
  const Vec2 tail[3] = {p.tail.position, p.tail.velocity, p.tail.acceleration};
  for (int d = 0; d < 3; ++d) {
    rows.push_back(row_for(0, 0.0, d));
    rhs.push_back(head[d]);
    rows.push_back(row_for(m - 1, p.durations.back(), d));
    rhs.push_back(tail[d]);
  }
  for (int i = 0; i + 1 < m; ++i) {
    rows.push_back(row_for(i, p.durations[static_cast<std::size_t>(i)], 0));
    rhs.push_back(p.waypoints[static_cast<std::size_t>(i)]);
    for (int d = 0; d < 3; ++d) {
      rows.push_back(row_for(i, p.durations[static_cast<std::size_t>(i)], d) - row_for(i + 1, 0.0, d));
      rhs.push_back(Vec2::Zero());
    }
  }
  const int c = static_cast<int>(rows.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + c, n + c);
  for (int i = 0; i < m; ++i) kkt.block<6, 6>(6 * i, 6 * i) = 2.0 * jerk_gram(p.durations[static_cast<std::size_t>(i)]);
  for (int r = 0; r < c; ++r) {
    kkt.block(n + r, 0, 1, n) = rows[static_cast<std::size_t>(r)];
    kkt.block(0, n + r, n, 1) = rows[static_cast<std::size_t>(r)].transpose();
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + c, 2);
  for (int r = 0; r < c; ++r) b.row(n + r) = rhs[static_cast<std::size_t>(r)].transpose();
  const Eigen::MatrixXd x = kkt.fullPivLu().solve(b);
  std::vector<Coeffs> out(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = x.block<6, 2>(6 * i, 0);
  return out;
}

inline double dense_jerk(const std::vector<Coeffs>& coeffs, const std::vector<double>& durations) {
  double sum = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const auto q = jerk_gram(durations[i]);
    sum += (coeffs[i].col(0).transpose() * q * coeffs[i].col(0))(0) + (coeffs[i].col(1).transpose() * q * coeffs[i].col(1))(0);
  }
  return sum;
}

/// Composite Gauss-Legendre (5 nodes) quadrature of f over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, int panels = 200) {
  static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
  static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                              0.2369268850561891};
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double mid = a + (k + 0.5) * h;
    for (int i = 0; i < 5; ++i) sum += w[i] * f(mid + 0.5 * h * x[i]);
  }
  return 0.5 * h * sum;
}

/// Central difference of f along coordinate i.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x, int i,
                                 double h = 1e-6) {
  const double x0 = x(i);
  x(i) = x0 + h;
  const double fp = f(x);
  x(i) = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor): relative error with an absolute floor.
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Gradient agreement: relative error <= rel, or absolute error <= abs.
inline bool gradient_close(double analytic, double numeric, double rel = 1e-5, double abs = 1e-8) {
  return std::abs(analytic - numeric) <= std::max(abs, rel * std::max(std::abs(analytic), std::abs(numeric)));
}

struct BruteForceResult {
  int makespan = -1;
  std::int64_t cost = 0;
};

/// Exhaustive anonymous MAPF on the grid: breadth-first over joint
/// configurations with per-step joint moves, forbidding shared cells and
/// swaps; lateral (y) moves cost dx_max, longitudinal moves cost 1, waits 0.
inline std::optional<BruteForceResult> brute_force_assignment(const react::assign::GridProblem& problem, int max_horizon) {
  using react::assign::Cell;
  const int n = static_cast<int>(problem.size());
  const std::int64_t dx_max = problem.grid_width;
  std::vector<Cell> goal = problem.targets;
  std::sort(goal.begin(), goal.end());
  std::vector<Cell> start = problem.robots;
  std::sort(start.begin(), start.end());

  std::map<std::vector<Cell>, std::int64_t> layer{{start, 0}};
  const Cell moves[5] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (int t = 0; t <= max_horizon; ++t) {
    if (auto it = layer.find(goal); it != layer.end()) return BruteForceResult{t, it->second};
    if (t == max_horizon) break;
    std::map<std::vector<Cell>, std::int64_t> next;
    for (const auto& [state, cost] : layer) {
      std::vector<int> choice(static_cast<std::size_t>(n), 0);
      while (true) {
        std::vector<Cell> moved(static_cast<std::size_t>(n));
        std::int64_t add = 0;
        bool ok = true;
        for (int r = 0; r < n && ok; ++r) {
          const Cell& from = state[static_cast<std::size_t>(r)];
          const Cell& d = moves[choice[static_cast<std::size_t>(r)]];
          const Cell to{from.x + d.x, from.y + d.y};
          if (to.x < 0 || to.y < 0 || to.x >= problem.grid_width || to.y >= problem.grid_height) ok = false;
          moved[static_cast<std::size_t>(r)] = to;
          add += d.y != 0 ? dx_max : (d.x != 0 ? 1 : 0);
        }
        for (int a = 0; a < n && ok; ++a) {
          for (int b = a + 1; b < n && ok; ++b) {
            const auto ua = static_cast<std::size_t>(a);
            const auto ub = static_cast<std::size_t>(b);
            if (moved[ua] == moved[ub]) ok = false;
            if (moved[ua] == state[ub] && moved[ub] == state[ua]) ok = false;
          }
        }
        if (ok) {
          std::sort(moved.begin(), moved.end());
          auto [it, inserted] = next.emplace(moved, cost + add);
          if (!inserted) it->second = std::min(it->second, cost + add);
        }
        int k = 0;
        while (k < n && ++choice[static_cast<std::size_t>(k)] == 5) choice[static_cast<std::size_t>(k++)] = 0;
        if (k == n) break;
      }
    }
    layer = std::move(next);
  }
  return std::nullopt;
}

/// Random instance with distinct robot cells and distinct target cells.
inline react::assign::GridProblem random_grid_problem(std::mt19937_64& rng, int max_side, int max_robots) {
  react::assign::GridProblem p;
  p.grid_width = uniform_int(rng, 1, max_side);
  p.grid_height = uniform_int(rng, 1, max_side);
  const int cells = p.grid_width * p.grid_height;
  const int n = uniform_int(rng, 1, std::min(max_robots, cells));
  auto pick = [&]() {
    std::vector<int> idx(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<react::assign::Cell> out;
    for (int i = 0; i < n; ++i) out.push_back(react::assign::cell_of_index(idx[static_cast<std::size_t>(i)], p.grid_width));
    return out;
  };
  p.robots = pick();
  p.targets = pick();
  return p;
}

}  // namespace oracle
