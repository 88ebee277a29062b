#pragma once

// One-to-many Dijkstra over the street network with deterministic paths:
// among equal-length shortest paths the lexicographically smallest node
// sequence wins. Node indices follow node-id order, so this is also the
// smallest id sequence.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "lrmatch/network.hpp"

namespace lrmatch {

class ShortestPathSearch {
 public:
  explicit ShortestPathSearch(const StreetNetwork& net)
      : net_(&net),
        dist_(net.node_count(), kInf),
        pred_(net.node_count(), kNone),
        settled_(net.node_count(), 0) {}

  // Runs from `source` until every target is settled or the reachable part
  // of the graph is exhausted.
  void run(NodeIndex source, std::span<const NodeIndex> targets) {
    reset();
    std::size_t remaining = 0;
    for (NodeIndex t : targets) {
      if (!is_target(t)) {
        mark_target(t);
        ++remaining;
      }
    }

    using Entry = std::pair<double, NodeIndex>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    touch(source);
    dist_[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty() && remaining > 0) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (settled_[u] || d > dist_[u]) continue;
      settled_[u] = 1;
      if (is_target(u)) --remaining;
      for (EdgeIndex e : net_->out_edges(u)) {
        const StreetEdge& edge = net_->edge(e);
        const NodeIndex v = edge.to;
        if (settled_[v]) continue;
        const double nd = d + edge.length_m;
        touch(v);
        if (nd < dist_[v]) {
          dist_[v] = nd;
          pred_[v] = u;
          heap.emplace(nd, v);
        } else if (nd == dist_[v] && pred_[v] != u && prefix_less(u, pred_[v])) {
          pred_[v] = u;
        }
      }
    }
  }

  bool reached(NodeIndex t) const { return t < settled_.size() && settled_[t]; }
  double distance(NodeIndex t) const { return reached(t) ? dist_[t] : kInf; }

  // Node sequence source..t; empty when t was not reached.
  std::vector<NodeIndex> path_to(NodeIndex t) const {
    std::vector<NodeIndex> out;
    if (!reached(t)) return out;
    for (NodeIndex v = t; v != kNone; v = pred_[v]) out.push_back(v);
    std::reverse(out.begin(), out.end());
    return out;
  }

  static constexpr double kInf = std::numeric_limits<double>::infinity();

 private:
  static constexpr NodeIndex kNone = std::numeric_limits<NodeIndex>::max();

  void touch(NodeIndex v) {
    if (dist_[v] == kInf && pred_[v] == kNone && !settled_[v]) touched_.push_back(v);
  }

  void reset() {
    for (NodeIndex v : touched_) {
      dist_[v] = kInf;
      pred_[v] = kNone;
      settled_[v] = 0;
    }
    touched_.clear();
    for (NodeIndex t : targets_) target_mark_[t] = 0;
    targets_.clear();
    if (target_mark_.size() != dist_.size()) target_mark_.assign(dist_.size(), 0);
  }

  bool is_target(NodeIndex v) const { return target_mark_[v] != 0; }
  void mark_target(NodeIndex v) {
    target_mark_[v] = 1;
    targets_.push_back(v);
  }

  // Is path(source..a) lexicographically smaller than path(source..b)?
  // Both nodes are settled, so their predecessor chains are final.
  bool prefix_less(NodeIndex a, NodeIndex b) const {
    chain_a_.clear();
    chain_b_.clear();
    for (NodeIndex v = a; v != kNone; v = pred_[v]) chain_a_.push_back(v);
    for (NodeIndex v = b; v != kNone; v = pred_[v]) chain_b_.push_back(v);
    return std::lexicographical_compare(chain_a_.rbegin(), chain_a_.rend(), chain_b_.rbegin(),
                                        chain_b_.rend());
  }

  const StreetNetwork* net_;
  std::vector<double> dist_;
  std::vector<NodeIndex> pred_;
  std::vector<std::uint8_t> settled_;
  std::vector<std::uint8_t> target_mark_;
  std::vector<NodeIndex> targets_;
  std::vector<NodeIndex> touched_;
  mutable std::vector<NodeIndex> chain_a_;
  mutable std::vector<NodeIndex> chain_b_;
};

}  // namespace lrmatch
