#include "react/tcf_r2t.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

namespace react::assign {

RoundingCollision::RoundingCollision(std::string which, std::size_t a, std::size_t b)
    : Error("rounding collision: " + which + " " + std::to_string(a) + " and " + std::to_string(b) +
            " share a grid cell"),
      list(std::move(which)),
      first(a),
      second(b) {}

GridProblem align_and_discretize(std::span<const Position2D> robots, std::span<const Position2D> targets,
                                 double cell_size) {
  if (robots.size() != targets.size()) {
    throw InvalidArgument("align_and_discretize: " + std::to_string(robots.size()) + " robots vs " +
                          std::to_string(targets.size()) + " targets");
  }
  if (!(cell_size > 0.0)) throw InvalidArgument("align_and_discretize: cell_size must be positive");
  if (robots.empty()) throw InvalidArgument("align_and_discretize: empty problem");
  for (const auto& p : robots)
    if (!is_finite(p)) throw InvalidArgument("align_and_discretize: non-finite robot position");
  for (const auto& p : targets)
    if (!is_finite(p)) throw InvalidArgument("align_and_discretize: non-finite target position");

  double robot_min_x = std::numeric_limits<double>::infinity();
  double target_min_x = std::numeric_limits<double>::infinity();
  for (const auto& p : robots) robot_min_x = std::min(robot_min_x, p.x());
  for (const auto& p : targets) target_min_x = std::min(target_min_x, p.x());

  GridProblem problem;
  problem.cell_size = cell_size;
  problem.target_shift_x = robot_min_x - target_min_x;

  const auto to_cell = [&](const Vec2& p) {
    return Cell{static_cast<int>(std::round(p.x() / cell_size)), static_cast<int>(std::round(p.y() / cell_size))};
  };
  for (const auto& p : robots) problem.robots.push_back(to_cell(p));
  for (const auto& p : targets) problem.targets.push_back(to_cell(Vec2(p.x() + problem.target_shift_x, p.y())));

  const auto check_distinct = [](const std::vector<Cell>& cells, const char* which) {
    std::map<Cell, std::size_t> seen;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto [it, inserted] = seen.emplace(cells[i], i);
      if (!inserted) throw RoundingCollision(which, it->second, i);
    }
  };
  check_distinct(problem.robots, "robots");
  check_distinct(problem.targets, "targets");

  int min_x = std::numeric_limits<int>::max();
  int min_y = std::numeric_limits<int>::max();
  for (const auto* list : {&problem.robots, &problem.targets}) {
    for (const auto& c : *list) {
      min_x = std::min(min_x, c.x);
      min_y = std::min(min_y, c.y);
    }
  }
  int max_x = 0;
  int max_y = 0;
  for (auto* list : {&problem.robots, &problem.targets}) {
    for (auto& c : *list) {
      c.x -= min_x;
      c.y -= min_y;
      max_x = std::max(max_x, c.x);
      max_y = std::max(max_y, c.y);
    }
  }
  problem.grid_width = max_x + 1;
  problem.grid_height = max_y + 1;
  problem.origin = Vec2(min_x * cell_size, min_y * cell_size);
  return problem;
}

int linear_index(const Cell& cell, int grid_width) {
  if (cell.x < 0 || cell.x >= grid_width) {
    throw InvalidArgument("linear_index: x=" + std::to_string(cell.x) + " outside [0, " +
                          std::to_string(grid_width) + ")");
  }
  return cell.x + cell.y * grid_width;
}

Cell cell_of_index(int index, int grid_width) {
  if (grid_width <= 0) throw InvalidArgument("cell_of_index: grid_width must be positive");
  return Cell{index % grid_width, index / grid_width};
}

TimeExpandedNetwork::TimeExpandedNetwork(const GridProblem& problem, int horizon, std::int64_t dx_max, bool prune)
    : horizon_(horizon), vertex_count_(problem.grid_width * problem.grid_height) {
  if (horizon < 0) throw InvalidArgument("build_network: negative horizon");
  const int w = problem.grid_width;
  const int h = problem.grid_height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int v = x + y * w;
      if (x + 1 < w) edges_.emplace_back(v, v + 1);
      if (y + 1 < h) edges_.emplace_back(v, v + w);
    }
  }
  const int edge_n = static_cast<int>(edges_.size());
  const int layer_nodes = 2 + layer_count() * vertex_count_;
  graph_ = FlowGraph(layer_nodes + 2 * horizon * edge_n);
  const auto gadget = [&](int t, int e) { return layer_nodes + 2 * ((t - 1) * edge_n + e); };

  // The grid has no blocked cells, so grid distance is the L1 distance.
  std::vector<int> from_robot(static_cast<std::size_t>(vertex_count_), 0);
  std::vector<int> to_target(static_cast<std::size_t>(vertex_count_), 0);
  if (prune) {
    for (int v = 0; v < vertex_count_; ++v) {
      const Cell c = cell_of_index(v, w);
      int dr = std::numeric_limits<int>::max();
      int dg = std::numeric_limits<int>::max();
      for (const auto& r : problem.robots) dr = std::min(dr, manhattan(c, r));
      for (const auto& g : problem.targets) dg = std::min(dg, manhattan(c, g));
      from_robot[static_cast<std::size_t>(v)] = dr;
      to_target[static_cast<std::size_t>(v)] = dg;
    }
  }
  // Whether grid vertex v may be occupied at step t.
  const auto alive = [&](int t, int v) {
    return !prune ||
           (from_robot[static_cast<std::size_t>(v)] <= t && to_target[static_cast<std::size_t>(v)] <= horizon - t);
  };

  for (const auto& c : problem.robots) add(source(), vertex_node(0, linear_index(c, w)), 1, 0, ArcKind::Source);
  for (int t = 1; t <= horizon; ++t) {
    const int out_prev = 2 * (t - 1);
    const int in_now = 2 * t - 1;
    for (int v = 0; v < vertex_count_; ++v) {
      if (alive(t - 1, v) && alive(t, v)) add(vertex_node(out_prev, v), vertex_node(in_now, v), 1, 0, ArcKind::Wait);
    }
    for (int e = 0; e < edge_n; ++e) {
      const auto [a, b] = edges_[static_cast<std::size_t>(e)];
      const bool a_from = alive(t - 1, a);
      const bool b_from = alive(t - 1, b);
      const bool a_to = alive(t, a);
      const bool b_to = alive(t, b);
      if (!((a_from && b_to) || (b_from && a_to))) continue;
      const int merge = gadget(t, e);
      const int split = merge + 1;
      // Vertical neighbours in the linear index differ in y: a column change.
      const bool lateral = (b - a) == w;
      if (a_from) add(vertex_node(out_prev, a), merge, 1, 0, ArcKind::MergeIn);
      if (b_from) add(vertex_node(out_prev, b), merge, 1, 0, ArcKind::MergeIn);
      add(merge, split, 1, lateral ? dx_max : 1, ArcKind::Move);
      if (a_to) add(split, vertex_node(in_now, a), 1, 0, ArcKind::SplitOut);
      if (b_to) add(split, vertex_node(in_now, b), 1, 0, ArcKind::SplitOut);
    }
    for (int v = 0; v < vertex_count_; ++v) {
      if (alive(t, v)) add(vertex_node(in_now, v), vertex_node(2 * t, v), 1, 0, ArcKind::Occupy);
    }
  }
  for (const auto& c : problem.targets) add(vertex_node(2 * horizon, linear_index(c, w)), sink(), 1, 0, ArcKind::Sink);
}

int TimeExpandedNetwork::add(int from, int to, int cap, std::int64_t cost, ArcKind kind) {
  arcs_.push_back({from, to, cap, cost, kind});
  const int index = graph_.add_arc(from, to, cap, cost);
  graph_arc_.push_back(index);
  return index;
}

std::vector<std::vector<int>> TimeExpandedNetwork::decode_paths(std::span<const Cell> starts, int grid_width) const {
  const auto vertex_of = [&](int node) { return (node - 2) % vertex_count_; };
  const auto next_with_flow = [&](int node) {
    for (const int e : graph_.out_arcs(node)) {
      if (graph_.flow(e) > 0) return graph_.arc(e).to;
    }
    throw Error("decode: flow path interrupted at node " + std::to_string(node));
  };
  std::vector<std::vector<int>> paths;
  paths.reserve(starts.size());
  for (const auto& start : starts) {
    std::vector<int> path;
    int node = vertex_node(0, linear_index(start, grid_width));
    path.push_back(vertex_of(node));
    for (int t = 1; t <= horizon_; ++t) {
      int next = next_with_flow(node);
      if (next >= 2 + layer_count() * vertex_count_) {
        next = next_with_flow(next);  // merge -> split
        next = next_with_flow(next);  // split -> t in
      }
      node = next_with_flow(next);  // t in -> t out
      path.push_back(vertex_of(node));
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

TimeExpandedNetwork build_network(const GridProblem& problem, int horizon, std::int64_t dx_max, bool prune) {
  return TimeExpandedNetwork(problem, horizon, dx_max, prune);
}

std::optional<FlowSolution> solve_mcmf(TimeExpandedNetwork& network, int required_flow) {
  return min_cost_flow(network.graph(), network.source(), network.sink(), required_flow);
}

int horizon_upper_bound(const GridProblem& problem) {
  int l = 0;
  for (const auto& r : problem.robots)
    for (const auto& g : problem.targets) l = std::max(l, manhattan(r, g));
  return std::max(0, static_cast<int>(problem.size()) + l - 1);
}

std::int64_t default_dx_max(const GridProblem& problem) { return problem.grid_width; }

namespace {

// Kuhn augmenting path over robot-target pairs within `limit`.
bool perfect_within(const GridProblem& problem, int limit) {
  const std::size_t n = problem.size();
  std::vector<int> owner(n, -1);
  std::vector<char> seen(n);
  const std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (seen[j] || manhattan(problem.robots[i], problem.targets[j]) > limit) continue;
      seen[j] = 1;
      if (owner[j] < 0 || augment(static_cast<std::size_t>(owner[j]))) {
        owner[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    if (!augment(i)) return false;
  }
  return true;
}

// Bottleneck assignment value: some robot travels at least this far in any
// assignment, conflicts or not, so no shorter horizon can be feasible.
int makespan_lower_bound(const GridProblem& problem) {
  std::vector<int> distances;
  for (const auto& r : problem.robots)
    for (const auto& g : problem.targets) distances.push_back(manhattan(r, g));
  std::sort(distances.begin(), distances.end());
  distances.erase(std::unique(distances.begin(), distances.end()), distances.end());
  std::size_t lo = 0;
  std::size_t hi = distances.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (perfect_within(problem, distances[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return distances[lo];
}

}  // namespace

AssignmentResult solve_grid_assignment(const GridProblem& problem, const AssignmentOptions& options) {
  const int n = static_cast<int>(problem.size());
  if (n < 1) throw InvalidArgument("solve_assignment: at least one robot required");
  if (problem.targets.size() != problem.robots.size()) throw InvalidArgument("solve_assignment: size mismatch");

  const std::int64_t dx_max = default_dx_max(problem);
  const int t_max = horizon_upper_bound(problem);
  int t_begin = std::max(0, options.t_min);
  if (options.warm_start) t_begin = std::max(t_begin, makespan_lower_bound(problem));

  for (int horizon = t_begin; horizon <= std::max(t_begin, t_max); ++horizon) {
    TimeExpandedNetwork network(problem, horizon, dx_max, true);
    // Cheap feasibility probe before the cost-optimal solve.
    if (max_flow(network.graph(), network.source(), network.sink(), n) < n) continue;
    network.graph().reset_flow();
    const auto flow = solve_mcmf(network, n);
    if (!flow) throw Error("solve_assignment: max-flow and min-cost flow disagree on feasibility");

    AssignmentResult result;
    result.makespan = horizon;
    result.total_cost = flow->cost;
    result.dx_max = dx_max;
    result.problem = problem;
    std::map<Cell, int> target_index;
    for (int j = 0; j < n; ++j) target_index[problem.targets[static_cast<std::size_t>(j)]] = j;
    const auto paths = network.decode_paths(problem.robots, problem.grid_width);
    for (const auto& path : paths) {
      std::vector<Cell> cells;
      cells.reserve(path.size());
      for (const int v : path) cells.push_back(cell_of_index(v, problem.grid_width));
      result.assignment.push_back(target_index.at(cells.back()));
      result.grid_trajectories.push_back(std::move(cells));
    }
    return result;
  }
  throw Error("solve_assignment: no feasible horizon up to " + std::to_string(t_max) +
              " (internal consistency failure)");
}

AssignmentResult solve_assignment(std::span<const Position2D> robots, std::span<const Position2D> targets,
                                  double cell_size, const AssignmentOptions& options) {
  return solve_grid_assignment(align_and_discretize(robots, targets, cell_size), options);
}

ConflictReport validate_conflict_free(std::span<const std::vector<Cell>> trajectories) {
  ConflictReport report;
  const auto push = [&](Violation::Kind kind, int step, int a, int b) {
    report.ok = false;
    report.violations.push_back({kind, step, a, b});
  };
  std::size_t steps = trajectories.empty() ? 0 : trajectories.front().size();
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].size() != steps || steps == 0) push(Violation::Kind::Length, 0, static_cast<int>(i), -1);
    for (std::size_t t = 1; t < trajectories[i].size(); ++t) {
      if (manhattan(trajectories[i][t - 1], trajectories[i][t]) > 1) {
        push(Violation::Kind::Jump, static_cast<int>(t), static_cast<int>(i), -1);
      }
    }
  }
  for (const auto& tr : trajectories) steps = std::min(steps, tr.size());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      for (std::size_t j = i + 1; j < trajectories.size(); ++j) {
        const auto& a = trajectories[i];
        const auto& b = trajectories[j];
        if (a[t] == b[t]) push(Violation::Kind::Vertex, static_cast<int>(t), static_cast<int>(i), static_cast<int>(j));
        if (t > 0 && a[t] == b[t - 1] && b[t] == a[t - 1] && a[t] != a[t - 1]) {
          push(Violation::Kind::Edge, static_cast<int>(t), static_cast<int>(i), static_cast<int>(j));
        }
      }
    }
  }
  return report;
}

ConflictReport validate_conflict_free(const AssignmentResult& result) {
  return validate_conflict_free(std::span<const std::vector<Cell>>(result.grid_trajectories));
}

std::string to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::Vertex: return "vertex";
    case Violation::Kind::Edge: return "edge";
    case Violation::Kind::Jump: return "jump";
    case Violation::Kind::Length: return "length";
  }
  return "unknown";
}

}  // namespace react::assign
