#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "betamask/dataset.hpp"
#include "betamask/graph.hpp"

namespace betamask {

/// Nodes outside any motif.
inline constexpr int kNoMotif = -1;

enum class ProtectedCorrelation { None, Negative };

struct MotifDatasetConfig {
  std::size_t num_motifs = 100;
  int informative_features = 4;
  int total_features = 11;
  /// Chance the protected feature of a node is inverted.
  double flip_probability = 0.5;
  ProtectedCorrelation protected_correlation = ProtectedCorrelation::None;
  bool heterophilic = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Motif datasets: nodes [5i, 5i+5) form house motif i; the remaining
/// nodes are backbone nodes that carry connector edges.
std::vector<int> motif_of_nodes(std::size_t node_count, std::size_t num_motifs);

/// Node labels are (distinct motifs among the node and its neighbors) − 1,
/// counted over undirected adjacency. Throws std::invalid_argument when a
/// node sees zero or more than two motifs.
Dataset generate_motif_dataset(const MotifDatasetConfig& config);

/// Fraction of non-motif (connector) edges whose endpoints carry different labels.
double cross_label_connector_fraction(const Dataset& data);

struct RegulatorLink {
  NodeId parent = 0;
  NodeId child = 0;
  double weight = 1.0;
};

struct RegulatorNetwork {
  std::vector<RegulatorLink> links;
  /// Genes whose base level depends on the class.
  std::vector<NodeId> masters;
};

struct ExpressionDatasetConfig {
  std::size_t num_genes = 100;
  std::size_t cells_per_class = 1000;
  double sparsity = 0.25;
  double correlation_threshold = 0.35;
  std::size_t num_masters = 5;
  double master_low = 0.0;
  double master_high = 2.0;
  double noise_std = 0.5;
  double mean_out_degree = 2.0;
  double weight_min = 0.5;
  double weight_max = 1.5;
  /// Replaces the sampled network.
  std::optional<RegulatorNetwork> network;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Random regulator DAG: genes in a shuffled order, the first num_masters
/// are masters, and each gene regulates Poisson-many later non-master genes.
RegulatorNetwork sample_regulator_network(const ExpressionDatasetConfig& config);

/// Pearson correlation between the columns of `x` (cells x genes).
/// Columns with zero variance give NaN.
Eigen::MatrixXd pearson_columns(const Eigen::MatrixXd& x);

/// Graph-classification dataset: one shared correlation graph over genes,
/// one single-feature matrix per cell, class labels per cell.
Dataset generate_expression_dataset(const ExpressionDatasetConfig& config);

/// Held-out accuracy of a logistic-regression probe on the flattened
/// per-instance features (graph tasks only).
double logistic_probe_accuracy(const Dataset& data, std::uint64_t seed = 0);

}  // namespace betamask
