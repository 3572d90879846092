#include "betamask/graph.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <string>
#include <string_view>

namespace betamask {

const char* to_string(TaskKind kind) {
  return kind == TaskKind::Node ? "node" : "graph";
}

TaskKind task_kind_from_string(const std::string_view name) {
  if (name == "node" || name == "node-classification") return TaskKind::Node;
  if (name == "graph" || name == "graph-classification") return TaskKind::Graph;
  throw std::invalid_argument("unknown task kind: " + std::string(name));
}

Graph Graph::build(std::vector<Edge> edges, std::size_t node_count) {
  for (const auto& e : edges) {
    if (e.src >= node_count || e.dst >= node_count) {
      throw std::out_of_range("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                              ") out of range for " + std::to_string(node_count) + " nodes");
    }
    if (e.src == e.dst) {
      throw std::invalid_argument("self-loop on node " + std::to_string(e.src));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  Graph g;
  g.node_count_ = node_count;
  g.edges_ = std::move(edges);
  return g;
}

Graph Graph::build(std::span<const std::pair<std::int64_t, std::int64_t>> pairs,
                   std::int64_t node_count) {
  if (node_count < 0) throw std::invalid_argument("negative node count");
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [s, t] : pairs) {
    if (s < 0 || t < 0 || s >= node_count || t >= node_count) {
      throw std::out_of_range("edge (" + std::to_string(s) + "," + std::to_string(t) +
                              ") out of range for " + std::to_string(node_count) + " nodes");
    }
    edges.push_back({static_cast<NodeId>(s), static_cast<NodeId>(t)});
  }
  return build(std::move(edges), static_cast<std::size_t>(node_count));
}

std::size_t Graph::find(NodeId src, NodeId dst) const {
  const Edge key{src, dst};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return npos;
  return static_cast<std::size_t>(it - edges_.begin());
}

EdgeMask::EdgeMask(std::vector<double> weights) : weights_(std::move(weights)) {
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw std::invalid_argument("edge mask weight outside [0,1]: " + std::to_string(w));
    }
  }
}

std::size_t GroundTruth::important_count() const {
  return static_cast<std::size_t>(std::count(important.begin(), important.end(), 1));
}

GroundTruth make_ground_truth(const Graph& graph, std::span<const Edge> true_edges,
                              bool directed) {
  GroundTruth truth;
  truth.important.assign(graph.edge_count(), 0);
  std::vector<Edge> sorted(true_edges.begin(), true_edges.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  for (const auto& e : sorted) {
    bool present = false;
    if (auto i = graph.find(e.src, e.dst); i != Graph::npos) {
      truth.important[i] = 1;
      present = true;
    }
    if (!directed) {
      if (auto j = graph.find(e.dst, e.src); j != Graph::npos) {
        truth.important[j] = 1;
        present = true;
      }
    }
    if (!present) {
      // In undirected mode a pair listed in both directions counts once.
      if (!directed && e.src > e.dst &&
          std::binary_search(sorted.begin(), sorted.end(), Edge{e.dst, e.src})) {
        continue;
      }
      truth.absent_true_edges.push_back(e);
    }
  }
  return truth;
}

std::vector<std::size_t> kept_edge_indices(const Graph& graph, const EdgeMask& mask,
                                           double threshold) {
  if (mask.size() != graph.edge_count()) {
    throw std::invalid_argument("mask length " + std::to_string(mask.size()) +
                                " does not match edge count " +
                                std::to_string(graph.edge_count()));
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] >= threshold) kept.push_back(i);
  }
  return kept;
}

Graph induce_subgraph(const Graph& graph, const EdgeMask& mask, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold outside [0,1]");
  }
  std::vector<Edge> edges;
  for (auto i : kept_edge_indices(graph, mask, threshold)) edges.push_back(graph.edge(i));
  return Graph::build(std::move(edges), graph.node_count());
}

KhopResult khop_subgraph(const Graph& graph, NodeId center, int hops) {
  const std::size_t n = graph.node_count();
  if (center >= n) throw std::out_of_range("khop center out of range");
  if (hops < 1) throw std::invalid_argument("hop count must be positive");

  std::vector<std::vector<NodeId>> adjacency(n);
  for (const auto& e : graph.edges()) {
    adjacency[e.src].push_back(e.dst);
    adjacency[e.dst].push_back(e.src);
  }
  std::vector<int> dist(n, -1);
  std::deque<NodeId> queue{center};
  dist[center] = 0;
  while (!queue.empty()) {
    NodeId v = queue.front();
    queue.pop_front();
    if (dist[v] == hops) continue;
    for (NodeId u : adjacency[v]) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }

  KhopResult result;
  for (std::size_t v = 0; v < n; ++v) {
    if (dist[v] >= 0) result.nodes.push_back(static_cast<NodeId>(v));
  }
  std::vector<Edge> kept;
  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    const auto& e = graph.edge(i);
    if (dist[e.src] >= 0 && dist[e.dst] >= 0) {
      kept.push_back(e);
      result.edge_index.push_back(i);
    }
  }
  result.graph = Graph::build(std::move(kept), n);
  return result;
}

}  // namespace betamask
