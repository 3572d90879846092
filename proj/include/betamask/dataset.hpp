#pragma once

#include <string>
#include <vector>

#include "betamask/graph.hpp"

namespace betamask {

/// A generated or loaded benchmark: one shared graph, its features and
/// labels, and the edge-level ground truth.
struct Dataset {
  std::string preset;
  TaskKind task = TaskKind::Node;
  Graph graph;
  FeatureSet features;
  LabelVector labels;
  /// True edges as generated (directed). `truth` is derived from these.
  std::vector<Edge> true_edges;
  GroundTruth truth;
  std::vector<std::string> warnings;

  std::size_t instance_count() const {
    return task == TaskKind::Node ? graph.node_count() : features.size();
  }
  std::size_t feature_dim() const {
    return features.empty() ? 0 : static_cast<std::size_t>(features.front().cols());
  }

  /// Throws std::invalid_argument when component shapes disagree.
  void validate() const;
};

}  // namespace betamask
