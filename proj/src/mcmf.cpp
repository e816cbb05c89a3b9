#include "react/mcmf.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <stdexcept>
#include <utility>

namespace react::assign {

int FlowGraph::add_arc(int from, int to, int cap, std::int64_t cost) {
  const int index = static_cast<int>(arcs_.size());
  arcs_.push_back({to, cap, cost});
  next_.push_back(heads_[static_cast<std::size_t>(from)]);
  heads_[static_cast<std::size_t>(from)] = index;
  arcs_.push_back({from, 0, -cost});
  next_.push_back(heads_[static_cast<std::size_t>(to)]);
  heads_[static_cast<std::size_t>(to)] = index + 1;
  original_cap_.push_back(cap);
  original_cap_.push_back(0);
  return index;
}

std::vector<int> FlowGraph::out_arcs(int node) const {
  std::vector<int> out;
  for (int e = heads_[static_cast<std::size_t>(node)]; e != -1; e = next_[static_cast<std::size_t>(e)]) {
    if ((e & 1) == 0) out.push_back(e);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

void FlowGraph::reset_flow() {
  for (std::size_t i = 0; i < arcs_.size(); ++i) arcs_[i].cap = original_cap_[i];
}

namespace {

// Dinic restricted to residual arcs accepted by `usable`; returns units pushed.
template <class Usable>
int blocking_flows(FlowGraph::Arc* arcs, const int* next, const int* heads, std::size_t n, int source, int sink,
                   int limit, Usable&& usable) {
  std::vector<int> level(n);
  std::vector<int> iter(n);
  std::vector<int> queue;
  queue.reserve(n);
  int total = 0;

  const auto bfs = [&]() {
    std::fill(level.begin(), level.end(), -1);
    queue.clear();
    level[static_cast<std::size_t>(source)] = 0;
    queue.push_back(source);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int u = queue[head];
      for (int e = heads[u]; e != -1; e = next[e]) {
        const auto& a = arcs[e];
        if (a.cap > 0 && level[static_cast<std::size_t>(a.to)] < 0 && usable(u, e)) {
          level[static_cast<std::size_t>(a.to)] = level[static_cast<std::size_t>(u)] + 1;
          queue.push_back(a.to);
        }
      }
    }
    return level[static_cast<std::size_t>(sink)] >= 0;
  };

  // Iterative blocking-flow DFS; paths carry unit flow on unit networks but
  // the bottleneck is tracked for generality.
  std::vector<int> path;
  while (total < limit && bfs()) {
    for (std::size_t v = 0; v < n; ++v) iter[v] = heads[v];
    while (total < limit) {
      path.clear();
      int u = source;
      bool found = false;
      while (true) {
        if (u == sink) {
          found = true;
          break;
        }
        int& e = iter[static_cast<std::size_t>(u)];
        while (e != -1) {
          const auto& a = arcs[e];
          if (a.cap > 0 && level[static_cast<std::size_t>(a.to)] == level[static_cast<std::size_t>(u)] + 1 &&
              usable(u, e)) {
            break;
          }
          e = next[e];
        }
        if (e == -1) {
          if (path.empty()) break;
          level[static_cast<std::size_t>(u)] = -1;  // dead end
          const int back = path.back();
          path.pop_back();
          u = arcs[back ^ 1].to;
          iter[static_cast<std::size_t>(u)] = next[back];
          continue;
        }
        path.push_back(e);
        u = arcs[e].to;
      }
      if (!found) break;
      int push = limit - total;
      for (const int e : path) push = std::min(push, arcs[e].cap);
      for (const int e : path) {
        arcs[e].cap -= push;
        arcs[e ^ 1].cap += push;
      }
      total += push;
    }
  }
  return total;
}

}  // namespace

std::optional<FlowSolution> min_cost_flow(FlowGraph& g, int source, int sink, int required_flow) {
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  const auto n = static_cast<std::size_t>(g.node_count());
  std::vector<std::int64_t> potential(n, 0);
  std::vector<std::int64_t> dist(n);
  FlowSolution sol;

  using Item = std::pair<std::int64_t, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  const auto s = static_cast<std::size_t>(sink);

  // Primal-dual: one Dijkstra per distinct shortest-path length, then every
  // augmenting path of zero reduced cost is saturated with blocking flows.
  while (sol.flow < required_flow) {
    std::fill(dist.begin(), dist.end(), kInf);
    heap = {};
    dist[static_cast<std::size_t>(source)] = 0;
    heap.emplace(0, source);
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      const auto uu = static_cast<std::size_t>(u);
      if (d != dist[uu]) continue;
      // Nodes still in the heap end up with potential += dist[sink] below,
      // the same value a full run would give them after the min().
      if (u == sink) break;
      for (int e = g.heads_[uu]; e != -1; e = g.next_[static_cast<std::size_t>(e)]) {
        const auto& a = g.arcs_[static_cast<std::size_t>(e)];
        if (a.cap <= 0) continue;
        const auto v = static_cast<std::size_t>(a.to);
        const std::int64_t nd = d + a.cost + potential[uu] - potential[v];
        if (nd < dist[v]) {
          dist[v] = nd;
          heap.emplace(nd, a.to);
        }
      }
    }
    if (dist[s] >= kInf) return std::nullopt;

    // Keep reduced costs nonnegative; nodes beyond the sink distance get the
    // sink distance so their potentials stay consistent with the settled set.
    for (std::size_t v = 0; v < n; ++v) potential[v] += std::min(dist[v], dist[s]);

    const auto* arcs = g.arcs_.data();
    const auto tight = [&](int u, int e) {
      const auto& a = arcs[e];
      return a.cost + potential[static_cast<std::size_t>(u)] - potential[static_cast<std::size_t>(a.to)] == 0;
    };
    // Cost is read off the flow change so no path bookkeeping is needed.
    std::vector<int> before(g.arcs_.size());
    for (std::size_t e = 0; e < g.arcs_.size(); e += 2) before[e] = g.arcs_[e].cap;
    const int pushed = blocking_flows(g.arcs_.data(), g.next_.data(), g.heads_.data(), n, source, sink,
                                      required_flow - sol.flow, tight);
    if (pushed == 0) throw std::logic_error("min_cost_flow: shortest path lost between search and augmentation");
    for (std::size_t e = 0; e < g.arcs_.size(); e += 2) {
      sol.cost += static_cast<std::int64_t>(before[e] - g.arcs_[e].cap) * g.arcs_[e].cost;
    }
    sol.flow += pushed;
  }
  return sol;
}

int max_flow(FlowGraph& g, int source, int sink, int limit) {
  return blocking_flows(g.arcs_.data(), g.next_.data(), g.heads_.data(), static_cast<std::size_t>(g.node_count()),
                        source, sink, limit, [](int, int) { return true; });
}

}  // namespace react::assign
