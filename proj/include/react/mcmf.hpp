#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace react::assign {

class FlowGraph;

struct FlowSolution {
  int flow = 0;
  std::int64_t cost = 0;
};

std::optional<FlowSolution> min_cost_flow(FlowGraph& graph, int source, int sink, int required_flow);
int max_flow(FlowGraph& graph, int source, int sink, int limit);

/// Residual flow graph with integral capacities and costs. Arcs are stored
/// in pairs (forward at even index, reverse at odd index).
class FlowGraph {
 public:
  struct Arc {
    int to;
    int cap;
    std::int64_t cost;
  };

  explicit FlowGraph(int node_count = 0) : heads_(static_cast<std::size_t>(node_count), -1) {}

  int node_count() const { return static_cast<int>(heads_.size()); }
  int add_node() {
    heads_.push_back(-1);
    return node_count() - 1;
  }

  /// Returns the index of the forward arc.
  int add_arc(int from, int to, int cap, std::int64_t cost);

  int arc_count() const { return static_cast<int>(arcs_.size()) / 2; }
  const Arc& arc(int index) const { return arcs_[static_cast<std::size_t>(index)]; }
  int arc_from(int index) const { return arcs_[static_cast<std::size_t>(index ^ 1)].to; }
  /// Flow currently carried by forward arc `index` (an even index).
  int flow(int index) const { return arcs_[static_cast<std::size_t>(index ^ 1)].cap; }

  /// Forward arcs leaving `node` in insertion order.
  std::vector<int> out_arcs(int node) const;

  void reset_flow();

 private:
  friend std::optional<FlowSolution> min_cost_flow(FlowGraph&, int, int, int);
  friend int max_flow(FlowGraph&, int, int, int);

  std::vector<Arc> arcs_;
  std::vector<int> original_cap_;
  std::vector<int> next_;
  std::vector<int> heads_;
};

/// Successive shortest augmenting paths with vertex potentials. Requires
/// nonnegative arc costs on the initial graph. Returns std::nullopt when
/// less than `required_flow` units can be routed; the graph then holds the
/// partial flow.
std::optional<FlowSolution> min_cost_flow(FlowGraph& graph, int source, int sink, int required_flow);

/// Dinic maximum flow, stopping early once `limit` units are routed.
int max_flow(FlowGraph& graph, int source, int sink, int limit = std::numeric_limits<int>::max());

}  // namespace react::assign
