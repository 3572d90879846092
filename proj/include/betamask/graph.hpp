#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace betamask {

using NodeId = std::uint32_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class TaskKind { Node, Graph };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string_view name);

/// Directed edge list over `node_count` nodes.
///
/// Edges are kept sorted by (src, dst) without duplicates, so an edge's
/// position is a stable key for masks and ground truth. Self-loops are
/// rejected; the GNN adds them implicitly during normalization.
class Graph {
 public:
  Graph() = default;

  /// Sorts and dedupes `edges`. Throws std::out_of_range on an index
  /// >= node_count and std::invalid_argument on a self-loop.
  static Graph build(std::vector<Edge> edges, std::size_t node_count);
  static Graph build(std::span<const std::pair<std::int64_t, std::int64_t>> pairs,
                     std::int64_t node_count);

  std::size_t node_count() const { return node_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  const Edge& edge(std::size_t i) const { return edges_[i]; }

  /// Position of (src, dst) in the canonical order, or npos.
  std::size_t find(NodeId src, NodeId dst) const;
  bool contains(NodeId src, NodeId dst) const { return find(src, dst) != npos; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
};

/// Per-edge weights in [0,1], index-aligned with a Graph's edge list.
class EdgeMask {
 public:
  EdgeMask() = default;
  explicit EdgeMask(std::vector<double> weights);

  static EdgeMask ones(std::size_t n) { return EdgeMask(std::vector<double>(n, 1.0)); }
  static EdgeMask constant(std::size_t n, double value) {
    return EdgeMask(std::vector<double>(n, value));
  }

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

/// Which graph edges are truly important, plus true edges the graph lacks.
struct GroundTruth {
  std::vector<std::uint8_t> important;
  std::vector<Edge> absent_true_edges;

  std::size_t important_count() const;
};

/// Builds GroundTruth from a set of true directed edges. With
/// `directed == false` an edge is important if either direction is true,
/// and a true edge is absent only when neither direction is in the graph.
GroundTruth make_ground_truth(const Graph& graph, std::span<const Edge> true_edges,
                              bool directed = false);

/// Node features: one row per node.
using FeatureMatrix = Eigen::MatrixXd;

/// Node-task datasets carry a single matrix; graph-task datasets one per
/// graph instance, all sharing the same Graph.
using FeatureSet = std::vector<FeatureMatrix>;

struct LabelVector {
  std::vector<int> values;
  int num_classes = 2;
  TaskKind task = TaskKind::Node;
};

/// Graph with only the edges whose mask weight is >= threshold.
Graph induce_subgraph(const Graph& graph, const EdgeMask& mask, double threshold);

/// Positions (in `graph`) of the edges that induce_subgraph keeps.
std::vector<std::size_t> kept_edge_indices(const Graph& graph, const EdgeMask& mask,
                                           double threshold);

struct KhopResult {
  Graph graph;                          // same node_count, edges among kept nodes
  std::vector<NodeId> nodes;            // sorted
  std::vector<std::size_t> edge_index;  // positions of kept edges in the source graph
};

/// Nodes within undirected distance `hops` of `center`, and the edges among them.
KhopResult khop_subgraph(const Graph& graph, NodeId center, int hops);

}  // namespace betamask
