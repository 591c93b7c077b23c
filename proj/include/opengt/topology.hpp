#pragma once

// Maximal digraph, activation-induced subgraphs and cluster (SCC) detection.
//
// Node ids are 0-based in code. Everything user-facing (scenario files, CSV,
// diagnostics) uses the 1-based "v1..vn" numbering; see node_label().

#include <algorithm>
#include <compare>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "opengt/errors.hpp"

namespace opengt {

using NodeId = std::size_t;

inline std::string node_label(NodeId id) { return "v" + std::to_string(id + 1); }

// Directed edge from -> to: `to` receives from `from`.
struct Edge {
  NodeId from;
  NodeId to;
  auto operator<=>(const Edge&) const = default;
};

using EdgeSet = std::set<Edge>;

class ActivationVector {
 public:
  ActivationVector() = default;
  explicit ActivationVector(std::size_t n, bool value = false) : bits_(n, value) {}
  explicit ActivationVector(std::vector<bool> bits) : bits_(std::move(bits)) {}

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](NodeId j) const { return bits_.at(j); }
  void set(NodeId j, bool value) { bits_.at(j) = value; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true)); }

  std::vector<NodeId> active_nodes() const {
    std::vector<NodeId> out;
    for (NodeId j = 0; j < bits_.size(); ++j)
      if (bits_[j]) out.push_back(j);
    return out;
  }

  const std::vector<bool>& bits() const noexcept { return bits_; }

  bool operator==(const ActivationVector&) const = default;

 private:
  std::vector<bool> bits_;
};

// Disjoint clusters over the active nodes. Clusters are sorted internally and
// ordered by their smallest member, so indices are stable for a given input.
struct ClusterPartition {
  std::vector<std::vector<NodeId>> clusters;
  std::map<NodeId, std::size_t> cluster_of;

  std::size_t size() const noexcept { return clusters.size(); }
  bool operator==(const ClusterPartition&) const = default;
};

namespace detail {

using Adjacency = std::map<NodeId, std::vector<NodeId>>;

inline Adjacency out_adjacency(const EdgeSet& edges, std::span<const NodeId> nodes) {
  Adjacency adj;
  for (NodeId v : nodes) adj[v];
  for (const auto& e : edges) {
    auto it = adj.find(e.from);
    if (it != adj.end() && adj.count(e.to)) it->second.push_back(e.to);
  }
  return adj;
}

// Hop distances from `source`; unreachable nodes are absent.
inline std::map<NodeId, std::size_t> bfs_distances(const Adjacency& adj, NodeId source) {
  std::map<NodeId, std::size_t> dist{{source, 0}};
  std::queue<NodeId> frontier;
  frontier.push(source);
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : adj.at(u)) {
      if (dist.emplace(v, dist[u] + 1).second) frontier.push(v);
    }
  }
  return dist;
}

struct Unreachable {
  NodeId from;
  NodeId to;
};

// Longest shortest path over `nodes` using `edges`, or the first unreachable pair.
inline std::variant<std::size_t, Unreachable> diameter_or_gap(const EdgeSet& edges,
                                                              std::span<const NodeId> nodes) {
  const auto adj = out_adjacency(edges, nodes);
  std::size_t diameter = 0;
  for (NodeId s : nodes) {
    const auto dist = bfs_distances(adj, s);
    for (NodeId t : nodes) {
      auto it = dist.find(t);
      if (it == dist.end()) return Unreachable{s, t};
      diameter = std::max(diameter, it->second);
    }
  }
  return diameter;
}

}  // namespace detail

// Strongly connected components (Tarjan) of the graph (nodes, edges). Edges with
// an endpoint outside `nodes` are ignored. Isolated nodes form singleton clusters.
inline ClusterPartition clusters(const EdgeSet& edges, std::span<const NodeId> nodes) {
  const auto adj = detail::out_adjacency(edges, nodes);

  std::map<NodeId, std::size_t> index, lowlink;
  std::set<NodeId> on_stack;
  std::vector<NodeId> stack;
  std::size_t next_index = 0;
  std::vector<std::vector<NodeId>> found;

  std::function<void(NodeId)> connect = [&](NodeId v) {
    index[v] = lowlink[v] = next_index++;
    stack.push_back(v);
    on_stack.insert(v);
    for (NodeId w : adj.at(v)) {
      if (!index.count(w)) {
        connect(w);
        lowlink[v] = std::min(lowlink[v], lowlink[w]);
      } else if (on_stack.count(w)) {
        lowlink[v] = std::min(lowlink[v], index[w]);
      }
    }
    if (lowlink[v] == index[v]) {
      std::vector<NodeId> component;
      NodeId w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        component.push_back(w);
      } while (w != v);
      std::sort(component.begin(), component.end());
      found.push_back(std::move(component));
    }
  };

  for (const auto& [v, _] : adj)
    if (!index.count(v)) connect(v);

  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

  ClusterPartition partition;
  partition.clusters = std::move(found);
  for (std::size_t q = 0; q < partition.clusters.size(); ++q)
    for (NodeId v : partition.clusters[q]) partition.cluster_of[v] = q;
  return partition;
}

inline bool is_strongly_connected(const EdgeSet& edges, std::span<const NodeId> nodes) {
  return nodes.empty() || std::holds_alternative<std::size_t>(detail::diameter_or_gap(edges, nodes));
}

// Longest shortest directed path over `nodes`; throws if some pair is unreachable.
inline std::size_t induced_diameter(const EdgeSet& edges, std::span<const NodeId> nodes) {
  auto result = detail::diameter_or_gap(edges, nodes);
  if (auto* gap = std::get_if<detail::Unreachable>(&result)) {
    throw ConfigError("graph is not strongly connected: " + node_label(gap->to) +
                      " is unreachable from " + node_label(gap->from));
  }
  return std::get<std::size_t>(result);
}

// The full potential network G = (V, E) plus the diameter upper bound used as
// the number of max-consensus iterations.
class MaximalDigraph {
 public:
  // Throws ConfigError on bad endpoints, self-loops, a bound below the exact
  // diameter, or a missing bound on a graph that is not strongly connected.
  MaximalDigraph(std::size_t node_count, const std::vector<Edge>& edges,
                 std::optional<std::size_t> diameter_bound = std::nullopt)
      : n_(node_count), out_(node_count), in_(node_count) {
    if (n_ == 0) throw ConfigError("graph must have at least one node");
    for (const auto& e : edges) {
      if (e.from >= n_ || e.to >= n_)
        throw ConfigError("edge endpoint out of range: (" + std::to_string(e.from + 1) + "," +
                          std::to_string(e.to + 1) + ")");
      if (e.from == e.to) throw ConfigError("self-loop edge on " + node_label(e.from));
      edges_.insert(e);
    }
    for (const auto& e : edges_) {
      out_[e.from].push_back(e.to);
      in_[e.to].push_back(e.from);
    }

    const auto all = all_nodes();
    auto exact = detail::diameter_or_gap(edges_, all);
    if (auto* d = std::get_if<std::size_t>(&exact)) {
      exact_diameter_ = *d;
      if (diameter_bound && *diameter_bound < *d)
        throw ConfigError("diameter_bound " + std::to_string(*diameter_bound) +
                          " is below the exact diameter " + std::to_string(*d));
      diameter_bound_ = diameter_bound.value_or(*d);
    } else {
      const auto gap = std::get<detail::Unreachable>(exact);
      if (!diameter_bound)
        throw ConfigError("diameter_bound is required: graph is not strongly connected (" +
                          node_label(gap.to) + " is unreachable from " + node_label(gap.from) + ")");
      // Only the strongly connected pieces can be checked.
      for (const auto& component : clusters(edges_, all).clusters) {
        const auto d = induced_diameter(edges_, component);
        if (*diameter_bound < d)
          throw ConfigError("diameter_bound " + std::to_string(*diameter_bound) +
                            " is below the diameter " + std::to_string(d) + " of a strongly connected component");
      }
      diameter_bound_ = *diameter_bound;
    }
    if (diameter_bound_ == 0) diameter_bound_ = 1;  // single node: Λ must be positive
  }

  std::size_t node_count() const noexcept { return n_; }
  const EdgeSet& edges() const noexcept { return edges_; }
  std::size_t diameter_bound() const noexcept { return diameter_bound_; }
  std::optional<std::size_t> exact_diameter_if_connected() const noexcept { return exact_diameter_; }

  const std::vector<NodeId>& out_neighbors(NodeId j) const { return out_.at(j); }
  const std::vector<NodeId>& in_neighbors(NodeId j) const { return in_.at(j); }

  std::vector<NodeId> all_nodes() const {
    std::vector<NodeId> v(n_);
    for (NodeId j = 0; j < n_; ++j) v[j] = j;
    return v;
  }

 private:
  std::size_t n_;
  EdgeSet edges_;
  std::vector<std::vector<NodeId>> out_, in_;
  std::optional<std::size_t> exact_diameter_;
  std::size_t diameter_bound_ = 1;
};

// Edges of G whose endpoints are both active.
inline EdgeSet active_subgraph(const MaximalDigraph& g, const ActivationVector& a) {
  if (a.size() != g.node_count())
    throw ConfigError("activation vector has length " + std::to_string(a.size()) + ", graph has " +
                      std::to_string(g.node_count()) + " nodes");
  EdgeSet out;
  for (const auto& e : g.edges())
    if (a[e.from] && a[e.to]) out.insert(e);
  return out;
}

inline ClusterPartition clusters(const MaximalDigraph& g, const ActivationVector& a) {
  const auto nodes = a.active_nodes();
  return clusters(active_subgraph(g, a), nodes);
}

// Throws ConfigError naming an unreachable pair if g is not strongly connected.
inline std::size_t exact_diameter(const MaximalDigraph& g) { return induced_diameter(g.edges(), g.all_nodes()); }

// True iff, for every aligned window [kβ, (k+1)β) fully inside the sequence, the
// union of the window's edges restricted to `nodes` is strongly connected on `nodes`.
inline bool is_beta_strongly_connected(std::span<const EdgeSet> rounds, std::size_t beta,
                                       std::span<const NodeId> nodes) {
  if (beta == 0) throw ConfigError("beta must be at least 1");
  if (rounds.size() < beta) throw ConfigError("sequence shorter than beta");
  const std::set<NodeId> members(nodes.begin(), nodes.end());
  for (std::size_t start = 0; start + beta <= rounds.size(); start += beta) {
    EdgeSet window;
    for (std::size_t t = start; t < start + beta; ++t)
      for (const auto& e : rounds[t])
        if (members.count(e.from) && members.count(e.to)) window.insert(e);
    if (!is_strongly_connected(window, nodes)) return false;
  }
  return true;
}

// Seven-agent network used by the shipped scenario: two 3-cycles (with chords
// v2->v1 and v7->v6) joined only through v4. Removing v4 leaves {v1,v2,v3} and
// {v5,v6,v7}, each still strongly connected without v3 or v5.
inline MaximalDigraph default_digraph() {
  auto e = [](std::size_t from, std::size_t to) { return Edge{from - 1, to - 1}; };
  return MaximalDigraph(7, {e(1, 2), e(2, 3), e(3, 1), e(2, 1),   //
                            e(5, 6), e(6, 7), e(7, 5), e(7, 6),   //
                            e(2, 4), e(4, 6), e(7, 4), e(4, 1)});
}

}  // namespace opengt
