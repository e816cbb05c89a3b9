#pragma once

#include "react/common.hpp"
#include "react/mcmf.hpp"

#include <compare>
#include <cstdlib>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace react::assign {

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

inline int manhattan(const Cell& a, const Cell& b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

/// Robots and targets on a common integer grid after longitudinal alignment.
struct GridProblem {
  std::vector<Cell> robots;
  std::vector<Cell> targets;
  int grid_width = 0;
  int grid_height = 0;
  double cell_size = 1.0;
  /// World position of cell (0,0) in the robots' frame.
  Vec2 origin = Vec2::Zero();
  /// x offset that was added to the targets before rounding.
  double target_shift_x = 0.0;

  std::size_t size() const { return robots.size(); }
  Vec2 robot_frame_position(const Cell& c) const {
    return origin + cell_size * Vec2(c.x, c.y);
  }
};

/// Two robots (or two targets) rounded onto the same cell.
class RoundingCollision : public Error {
 public:
  RoundingCollision(std::string list, std::size_t first, std::size_t second);
  std::string list;
  std::size_t first;
  std::size_t second;
};

GridProblem align_and_discretize(std::span<const Position2D> robots, std::span<const Position2D> targets,
                                 double cell_size);

int linear_index(const Cell& cell, int grid_width);
Cell cell_of_index(int index, int grid_width);

/// Node layout of the T-step time-expanded network.
///
/// Layers: "0 out", then "t in" and "t out" for t = 1..T, i.e. 2T+1 copies of
/// every grid vertex. Between layer (t-1 out) and (t in) every grid edge
/// {A, B} gets a merge node and a split node: A_out -> merge, B_out -> merge,
/// merge -> split (unit capacity, carries the move cost), split -> A_in,
/// split -> B_in. One unit per edge per step means no swaps. Each vertex has
/// a wait arc (t-1 out) -> (t in) and a unit arc (t in) -> (t out), so at most
/// one robot occupies a vertex per step.
class TimeExpandedNetwork {
 public:
  enum class ArcKind { Source, Sink, Wait, MergeIn, Move, SplitOut, Occupy };

  struct ArcInfo {
    int from;
    int to;
    int capacity;
    std::int64_t cost;
    ArcKind kind;
  };

  /// With `prune`, arcs touching a node that no robot can reach by its step,
  /// or from which no target is reachable in the remaining steps, are left
  /// out. Node numbering is unchanged and every feasible flow survives.
  TimeExpandedNetwork(const GridProblem& problem, int horizon, std::int64_t dx_max, bool prune = false);

  int horizon() const { return horizon_; }
  int vertex_count() const { return vertex_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int layer_count() const { return 2 * horizon_ + 1; }
  int source() const { return 0; }
  int sink() const { return 1; }

  /// Node of grid vertex `v` in layer `layer` (0 = "0 out", 2t-1 = "t in", 2t = "t out").
  int vertex_node(int layer, int v) const { return 2 + layer * vertex_count_ + v; }

  const std::vector<ArcInfo>& arcs() const { return arcs_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  FlowGraph& graph() { return graph_; }
  const FlowGraph& graph() const { return graph_; }

  /// Follows unit flow from each robot's start vertex; returns one vertex
  /// index per layer step 0..T for each robot.
  std::vector<std::vector<int>> decode_paths(std::span<const Cell> starts, int grid_width) const;

 private:
  int add(int from, int to, int cap, std::int64_t cost, ArcKind kind);

  int horizon_;
  int vertex_count_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<ArcInfo> arcs_;
  std::vector<int> graph_arc_;
  FlowGraph graph_;
};

TimeExpandedNetwork build_network(const GridProblem& problem, int horizon, std::int64_t dx_max, bool prune = false);

/// Minimum cost flow of `required_flow` units, or nullopt if infeasible.
std::optional<FlowSolution> solve_mcmf(TimeExpandedNetwork& network, int required_flow);

struct AssignmentOptions {
  int t_min = 0;
  /// Start the horizon search at the bottleneck assignment distance (the
  /// smallest achievable longest robot-target L1 distance) instead of t_min.
  bool warm_start = false;
};

struct AssignmentResult {
  /// assignment[robot] = target index.
  std::vector<int> assignment;
  /// makespan + 1 cells per robot.
  std::vector<std::vector<Cell>> grid_trajectories;
  int makespan = 0;
  std::int64_t total_cost = 0;
  std::int64_t dx_max = 0;
  GridProblem problem;
};

/// Iteration bound N + l - 1, l the largest robot-target grid distance.
int horizon_upper_bound(const GridProblem& problem);

/// dx_max = grid width, so one lateral move outweighs any longitudinal detour.
std::int64_t default_dx_max(const GridProblem& problem);

AssignmentResult solve_grid_assignment(const GridProblem& problem, const AssignmentOptions& options = {});

AssignmentResult solve_assignment(std::span<const Position2D> robots, std::span<const Position2D> targets,
                                  double cell_size, const AssignmentOptions& options = {});

struct Violation {
  enum class Kind { Vertex, Edge, Jump, Length };
  Kind kind;
  int step;
  int robot_a;
  int robot_b;
};

struct ConflictReport {
  bool ok = true;
  std::vector<Violation> violations;
};

ConflictReport validate_conflict_free(std::span<const std::vector<Cell>> trajectories);
ConflictReport validate_conflict_free(const AssignmentResult& result);

std::string to_string(Violation::Kind kind);

}  // namespace react::assign
