#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "betamask/dataset.hpp"
#include "betamask/graph.hpp"

namespace betamask {

/// Non-finite loss or activation during training/explaining.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backward called with a cache that does not belong to the model's
/// current parameters.
class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Layer sizes from input features to classes.
///
/// Node tasks: every map is a graph convolution, ReLU between them.
/// Graph tasks: all but the last map are convolutions (each followed by
/// ReLU), node embeddings are mean-pooled, and the last map is affine.
struct GnnConfig {
  std::vector<int> layer_dims;
  TaskKind task = TaskKind::Node;

  void validate() const;
  std::size_t layer_count() const { return layer_dims.size() - 1; }
  std::size_t conv_count() const {
    return task == TaskKind::Node ? layer_count() : layer_count() - 1;
  }
  int input_dim() const { return layer_dims.front(); }
  int num_classes() const { return layer_dims.back(); }
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // in_dim x out_dim
  Eigen::VectorXd bias;     // out_dim
};

class GnnModel {
 public:
  GnnModel() = default;
  GnnModel(GnnConfig config, std::vector<DenseLayer> layers);

  /// Glorot-uniform weights in ±sqrt(6/(in+out)), zero biases.
  static GnnModel initialize(GnnConfig config, std::uint64_t seed);

  const GnnConfig& config() const { return config_; }
  std::span<const DenseLayer> layers() const { return layers_; }

  /// Parameters in a fixed order: each layer's weights (row-major), then bias.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  std::size_t parameter_count() const;

  /// Bumped by every mutation; forward caches record it.
  std::uint64_t generation() const { return generation_; }

  friend bool operator==(const GnnModel& a, const GnnModel& b);

 private:
  void check_shapes() const;

  GnnConfig config_;
  std::vector<DenseLayer> layers_;
  std::uint64_t generation_ = 0;
};

/// Symmetric-normalized propagation D̃^-1/2 (A_w + I) D̃^-1/2 for a
/// weighting of the graph's edges. Messages flow src -> dst; a node's
/// degree is 1 plus the summed weights of its incoming edges.
class Propagation {
 public:
  Propagation() = default;
  Propagation(const Graph& graph, std::span<const double> edge_weights);

  /// Â h.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& h) const;
  /// Âᵀ g.
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& g) const;

  std::span<const double> edge_coefficients() const { return edge_coef_; }
  std::span<const double> self_coefficients() const { return self_coef_; }
  std::span<const double> degrees() const { return degree_; }
  std::span<const double> weights() const { return weights_; }

 private:
  const Graph* graph_ = nullptr;
  std::vector<double> weights_;
  std::vector<double> degree_;
  std::vector<double> edge_coef_;
  std::vector<double> self_coef_;
};

/// Activations of one instance, kept for backprop.
struct InstanceCache {
  std::vector<Eigen::MatrixXd> inputs;      // conv-layer inputs H_k
  std::vector<Eigen::MatrixXd> aggregated;  // Â H_k
  std::vector<Eigen::MatrixXd> preact;      // Â H_k W_k + b_k
  Eigen::RowVectorXd pooled;                // graph tasks only
};

struct ForwardCache {
  const GnnModel* model = nullptr;
  std::uint64_t generation = 0;
  const Graph* graph = nullptr;
  Propagation propagation;
  /// Rows of `logits`: node indices for node tasks, graph indices otherwise.
  std::vector<std::size_t> instances;
  std::vector<InstanceCache> activations;
  Eigen::MatrixXd logits;
};

/// Forward pass. Node tasks return one logit row per node; graph tasks one
/// row per graph listed in `graphs` (all graphs when empty). Empty
/// `edge_weights` means all ones.
ForwardCache forward(const GnnModel& model, const Graph& graph, const FeatureSet& features,
                     std::span<const double> edge_weights = {},
                     std::span<const std::size_t> graphs = {});

/// Same logits as forward() without keeping activations.
Eigen::MatrixXd predict_logits(const GnnModel& model, const Graph& graph,
                               const FeatureSet& features,
                               std::span<const double> edge_weights = {},
                               std::span<const std::size_t> graphs = {});

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits);

struct LossGrad {
  double value = 0.0;
  Eigen::MatrixXd dlogits;
};

/// Mean over `rows` (all rows when empty) of −log softmax(logits)[label].
/// Throws std::out_of_range on a label outside [0, classes).
LossGrad cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                       std::span<const std::size_t> rows = {});

/// Σ_rows KL(target_r ‖ softmax(logits_r)). Target rows must be
/// non-negative and sum to 1 within 1e-9.
LossGrad kl_to_target(const Eigen::MatrixXd& target, const Eigen::MatrixXd& logits);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  Eigen::VectorXd flatten() const;
};

/// Parameter gradients for an upstream gradient on the cached logits.
Gradients backward(const GnnModel& model, const ForwardCache& cache,
                   const Eigen::MatrixXd& dlogits);

/// Gradient of mean cross-entropy over `rows` plus (weight_decay/2)‖θ‖².
Gradients backward(const GnnModel& model, const ForwardCache& cache, std::span<const int> labels,
                   std::span<const std::size_t> rows = {}, double weight_decay = 0.0);

/// d(loss)/d(edge weight) for an upstream gradient on the cached logits.
std::vector<double> backward_edge_weights(const GnnModel& model, const ForwardCache& cache,
                                          const Eigen::MatrixXd& dlogits);

/// Gradient of Σ KL(target ‖ softmax(logits)) w.r.t. each edge weight.
std::vector<double> backward_edge_weights_kl(const GnnModel& model, const ForwardCache& cache,
                                             const Eigen::MatrixXd& target);

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  int epochs = 200;
  std::uint64_t seed = 0;
  /// Graph tasks only: minibatch size per Adam step (0 = full batch).
  std::size_t batch_size = 0;
  double train_fraction = 0.8;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, count) cut at round(train_fraction * count).
Split split_instances(std::size_t count, double train_fraction, std::uint64_t seed);

struct TrainResult {
  GnnModel model;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> loss_trace;
  Split split;
};

TrainResult train(const TrainConfig& config, const GnnConfig& gnn_config, const Dataset& data);

/// Fraction of `rows` whose argmax logit equals the label.
double accuracy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                std::span<const std::size_t> rows = {});

/// Argmax per row; ties go to the lower class.
std::vector<int> predict_classes(const Eigen::MatrixXd& logits);

std::string model_to_json(const GnnModel& model);
GnnModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const GnnModel& model);
GnnModel load_model(const std::filesystem::path& path);

}  // namespace betamask
