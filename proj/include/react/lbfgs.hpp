#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace react::lbfgs {

struct Settings {
  int memory = 8;
  int max_iterations = 60;
  /// Stop when ||g||_inf <= grad_tolerance * max(1, ||x||_inf).
  double grad_tolerance = 1e-5;
  /// Stop when the last step reduced the cost by less than this fraction.
  double relative_cost_tolerance = 1e-6;
  int max_line_search = 40;
  double armijo = 1e-4;
  double wolfe = 0.9;
};

enum class Status { Converged, SmallDecrease, MaxIterations, LineSearchFailed, NonFinite };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::SmallDecrease: return "small_decrease";
    case Status::MaxIterations: return "max_iterations";
    case Status::LineSearchFailed: return "line_search_failed";
    case Status::NonFinite: return "non_finite";
  }
  return "unknown";
}

struct Result {
  double cost = 0.0;
  int iterations = 0;
  int evaluations = 0;
  Status status = Status::MaxIterations;
  bool warning() const { return status == Status::LineSearchFailed || status == Status::NonFinite; }
};

/// Limited-memory BFGS with a bisection/expansion weak-Wolfe line search.
/// `f(x, g)` returns the cost and writes the gradient; +inf marks an
/// infeasible point that the line search backs away from. On return `x`
/// holds the best iterate seen, never worse than the initial point.
template <class Objective>
Result minimize(Objective&& f, Eigen::VectorXd& x, const Settings& settings) {
  Result result;
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n);
  double fx = f(x, g);
  result.evaluations = 1;
  result.cost = fx;
  if (!std::isfinite(fx) || !g.allFinite()) {
    result.status = Status::NonFinite;
    return result;
  }
  if (n == 0) {
    result.status = Status::Converged;
    return result;
  }

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd d(n), x_new(n), g_new(n);
  std::vector<double> alpha(static_cast<std::size_t>(std::max(settings.memory, 1)));

  auto converged = [&](const Eigen::VectorXd& grad, const Eigen::VectorXd& at) {
    return grad.cwiseAbs().maxCoeff() <= settings.grad_tolerance * std::max(1.0, at.cwiseAbs().maxCoeff());
  };
  if (converged(g, x)) {
    result.status = Status::Converged;
    return result;
  }

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    // Two-loop recursion.
    d = -g;
    const int k = static_cast<int>(s_hist.size());
    for (int i = k - 1; i >= 0; --i) {
      const auto ui = static_cast<std::size_t>(i);
      alpha[ui] = rho_hist[ui] * s_hist[ui].dot(d);
      d -= alpha[ui] * y_hist[ui];
    }
    if (k > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (int i = 0; i < k; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double beta = rho_hist[ui] * y_hist[ui].dot(d);
      d += (alpha[ui] - beta) * s_hist[ui];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope = -g.squaredNorm();
    }

    double step = k == 0 ? 1.0 / std::max(1.0, d.norm()) : 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool accepted = false;
    double f_new = fx;
    double best_f = fx;
    Eigen::VectorXd best_x = x;
    Eigen::VectorXd best_g = g;
    for (int ls = 0; ls < settings.max_line_search; ++ls) {
      x_new = x + step * d;
      f_new = f(x_new, g_new);
      ++result.evaluations;
      const bool finite = std::isfinite(f_new) && g_new.allFinite();
      if (finite && f_new < best_f) {
        best_f = f_new;
        best_x = x_new;
        best_g = g_new;
      }
      if (!finite || f_new > fx + settings.armijo * step * slope) {
        hi = step;
      } else if (g_new.dot(d) < settings.wolfe * slope) {
        lo = step;
      } else {
        accepted = true;
        break;
      }
      step = std::isinf(hi) ? 2.0 * lo : 0.5 * (lo + hi);
      if (!std::isinf(hi) && hi - lo < 1e-16 * std::max(1.0, hi)) break;
    }

    if (!accepted) {
      // Keep any strict improvement found along the way.
      if (best_f < fx) {
        x = best_x;
        fx = best_f;
        g = best_g;
      }
      result.cost = fx;
      result.iterations = iter + 1;
      result.status = Status::LineSearchFailed;
      return result;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double decrease = fx - f_new;
    x = x_new;
    g = g_new;
    const double f_old = fx;
    fx = f_new;
    result.iterations = iter + 1;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > settings.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    if (converged(g, x)) {
      result.status = Status::Converged;
      break;
    }
    if (decrease <= settings.relative_cost_tolerance * std::max(1.0, std::abs(f_old))) {
      result.status = Status::SmallDecrease;
      break;
    }
    result.status = Status::MaxIterations;
  }
  result.cost = fx;
  return result;
}

}  // namespace react::lbfgs
