#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "betamask/dataset.hpp"
#include "betamask/gnn.hpp"
#include "betamask/graph.hpp"

namespace betamask {

/// kGraphOnly counts false negatives among graph edges only;
/// kIncludeAbsent also counts true edges missing from the graph.
enum class FnMode { GraphOnly, IncludeAbsent };

const char* to_string(FnMode mode);
FnMode fn_mode_from_string(const std::string& name);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  FnMode mode = FnMode::GraphOnly;

  std::size_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// An edge is predicted important iff its weight >= threshold.
ConfusionCounts confusion(const EdgeMask& mask, const GroundTruth& truth, double threshold = 0.5,
                          FnMode mode = FnMode::GraphOnly);

/// TP / (TP + FP + FN + 1e-9).
double jaccard(const ConfusionCounts& c);
/// Harmonic mean of precision and recall; 0 when TP = 0.
double f1(const ConfusionCounts& c);
/// (TP + TN) / total. Throws std::invalid_argument on empty counts.
double accuracy(const ConfusionCounts& c);

enum class KlAggregation { Sum, Mean };

/// 1 − exp(−KL(softmax(f(X,G)) ‖ softmax(f(X,G_s)))) with G_s the edges
/// kept at `threshold`. The per-instance KLs are averaged by default; their
/// sum saturates the score at 1 on any graph with many instances.
double unfaithfulness(const GnnModel& model, const Graph& graph, const FeatureSet& features,
                      const EdgeMask& mask, double threshold = 0.5,
                      KlAggregation aggregation = KlAggregation::Mean);

struct KhopNodeScore {
  NodeId node = 0;
  ConfusionCounts counts;
  double jaccard = 0.0;
  double f1 = 0.0;
};

struct KhopEvaluation {
  /// Nodes whose neighborhood has at least one edge, in index order.
  std::vector<KhopNodeScore> per_node;
  std::size_t best = 0;  // position in per_node

  const KhopNodeScore& best_score() const { return per_node.at(best); }
};

/// Restricts mask and truth to each node's `hops`-hop neighborhood and
/// keeps the node with the highest Jaccard (ties go to the lower node).
/// With kIncludeAbsent, absent true edges between neighborhood nodes are
/// counted. Throws std::invalid_argument when every neighborhood is empty.
KhopEvaluation best_khop_subgraph_eval(const Dataset& data, const EdgeMask& mask, int hops = 1,
                                       double threshold = 0.5, FnMode mode = FnMode::GraphOnly);

struct SignificanceResult {
  double u = 0.0;  // U of the first sample
  double p = 1.0;  // two-sided
  std::string bucket;
  bool exact = false;
};

/// "****" p <= 1e-4, "***" <= 1e-3, "**" <= 0.01, "*" <= 0.05, else "ns".
std::string significance_bucket(double p);

/// Two-sided Mann-Whitney U test. Exact null distribution when the
/// combined size is <= 12 without ties, otherwise the normal approximation
/// with tie-corrected variance and continuity correction.
SignificanceResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// (p − m + 1e-5) / (M − m) over accepted entries, where m and M are the
/// smallest and largest accepted values; rejected entries map to 0, and a
/// zero range maps every accepted entry to 1.
std::vector<double> scale_probs_for_display(std::span<const double> probs,
                                            const std::vector<bool>& accepted);

}  // namespace betamask
