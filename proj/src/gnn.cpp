#include "betamask/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "betamask/adam.hpp"
#include "betamask/io.hpp"
#include "betamask/rng.hpp"

namespace betamask {

// ---------------------------------------------------------------- config

void GnnConfig::validate() const {
  if (layer_dims.size() < 2) throw std::invalid_argument("GnnConfig needs at least two dims");
  if (task == TaskKind::Graph && layer_dims.size() < 3) {
    throw std::invalid_argument("graph tasks need a convolution before the readout layer");
  }
  for (int d : layer_dims) {
    if (d <= 0) throw std::invalid_argument("GnnConfig dims must be positive");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0,1]");
  }
}

// ----------------------------------------------------------------- model

GnnModel::GnnModel(GnnConfig config, std::vector<DenseLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  config_.validate();
  check_shapes();
}

void GnnModel::check_shapes() const {
  if (layers_.size() != config_.layer_count()) {
    throw std::invalid_argument("layer count does not match config");
  }
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.weights.rows() != config_.layer_dims[k] || l.weights.cols() != config_.layer_dims[k + 1] ||
        l.bias.size() != config_.layer_dims[k + 1]) {
      throw std::invalid_argument("layer " + std::to_string(k) + " shape does not match config");
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw std::invalid_argument("layer " + std::to_string(k) + " has non-finite values");
    }
  }
}

GnnModel GnnModel::initialize(GnnConfig config, std::uint64_t seed) {
  config.validate();
  auto rng = make_rng(seed, 1);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < config.layer_dims.size(); ++k) {
    const int in = config.layer_dims[k];
    const int out = config.layer_dims[k + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    DenseLayer l{Eigen::MatrixXd(in, out), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < in; ++r) {
      for (int c = 0; c < out; ++c) l.weights(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    layers.push_back(std::move(l));
  }
  return GnnModel(std::move(config), std::move(layers));
}

std::size_t GnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Eigen::VectorXd GnnModel::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat(pos++) = l.weights(r, c);
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat(pos++) = l.bias(i);
  }
  return flat;
}

void GnnModel::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw std::invalid_argument("parameter vector has wrong size");
  }
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = flat(pos++);
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = flat(pos++);
  }
  ++generation_;
}

bool operator==(const GnnModel& a, const GnnModel& b) {
  if (a.config_.layer_dims != b.config_.layer_dims || a.config_.task != b.config_.task) {
    return false;
  }
  for (std::size_t k = 0; k < a.layers_.size(); ++k) {
    if (a.layers_[k].weights != b.layers_[k].weights || a.layers_[k].bias != b.layers_[k].bias) {
      return false;
    }
  }
  return true;
}

Eigen::VectorXd Gradients::flatten() const {
  Eigen::Index total = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) total += weights[k].size() + biases[k].size();
  Eigen::VectorXd flat(total);
  Eigen::Index pos = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    for (Eigen::Index r = 0; r < weights[k].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights[k].cols(); ++c) flat(pos++) = weights[k](r, c);
    }
    for (Eigen::Index i = 0; i < biases[k].size(); ++i) flat(pos++) = biases[k](i);
  }
  return flat;
}

// ----------------------------------------------------------- propagation

Propagation::Propagation(const Graph& graph, std::span<const double> edge_weights)
    : graph_(&graph) {
  const std::size_t n = graph.node_count();
  const std::size_t m = graph.edge_count();
  if (edge_weights.empty()) {
    weights_.assign(m, 1.0);
  } else {
    if (edge_weights.size() != m) {
      throw std::invalid_argument("edge weight count " + std::to_string(edge_weights.size()) +
                                  " does not match edge count " + std::to_string(m));
    }
    weights_.assign(edge_weights.begin(), edge_weights.end());
  }
  degree_.assign(n, 1.0);
  for (std::size_t e = 0; e < m; ++e) {
    if (!std::isfinite(weights_[e])) throw std::invalid_argument("non-finite edge weight");
    degree_[graph.edge(e).dst] += weights_[e];
  }
  for (double d : degree_) {
    if (!(d > 0.0)) throw std::invalid_argument("edge weights give a non-positive degree");
  }
  edge_coef_.resize(m);
  for (std::size_t e = 0; e < m; ++e) {
    const auto& edge = graph.edge(e);
    edge_coef_[e] = weights_[e] / std::sqrt(degree_[edge.src] * degree_[edge.dst]);
  }
  self_coef_.resize(n);
  for (std::size_t v = 0; v < n; ++v) self_coef_[v] = 1.0 / degree_[v];
}

Eigen::MatrixXd Propagation::apply(const Eigen::MatrixXd& h) const {
  Eigen::MatrixXd out(h.rows(), h.cols());
  for (Eigen::Index v = 0; v < h.rows(); ++v) out.row(v) = self_coef_[v] * h.row(v);
  const auto edges = graph_->edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    out.row(edges[e].dst) += edge_coef_[e] * h.row(edges[e].src);
  }
  return out;
}

Eigen::MatrixXd Propagation::apply_transpose(const Eigen::MatrixXd& g) const {
  Eigen::MatrixXd out(g.rows(), g.cols());
  for (Eigen::Index v = 0; v < g.rows(); ++v) out.row(v) = self_coef_[v] * g.row(v);
  const auto edges = graph_->edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    out.row(edges[e].src) += edge_coef_[e] * g.row(edges[e].dst);
  }
  return out;
}

// --------------------------------------------------------------- forward

namespace {

void check_inputs(const GnnModel& model, const Graph& graph, const FeatureSet& features) {
  const auto& cfg = model.config();
  if (cfg.task == TaskKind::Node && features.size() != 1) {
    throw std::invalid_argument("node tasks take exactly one feature matrix");
  }
  if (features.empty()) throw std::invalid_argument("no feature matrices");
  for (const auto& x : features) {
    if (x.rows() != static_cast<Eigen::Index>(graph.node_count())) {
      throw std::invalid_argument("feature rows " + std::to_string(x.rows()) +
                                  " != node count " + std::to_string(graph.node_count()));
    }
    if (x.cols() != cfg.input_dim()) {
      throw std::invalid_argument("feature dim " + std::to_string(x.cols()) +
                                  " != model input dim " + std::to_string(cfg.input_dim()));
    }
    if (!x.allFinite()) throw std::invalid_argument("non-finite node features");
  }
}

std::vector<std::size_t> resolve_instances(const GnnModel& model, const Graph& graph,
                                           const FeatureSet& features,
                                           std::span<const std::size_t> graphs) {
  std::vector<std::size_t> rows;
  if (model.config().task == TaskKind::Node) {
    rows.resize(graph.node_count());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
  }
  if (graphs.empty()) {
    rows.resize(features.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  } else {
    rows.assign(graphs.begin(), graphs.end());
    for (auto g : rows) {
      if (g >= features.size()) throw std::out_of_range("graph index out of range");
    }
  }
  return rows;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

/// Runs one instance; returns logits (n×C for node tasks, 1×C for graph tasks).
Eigen::MatrixXd run_instance(const GnnModel& model, const Propagation& prop,
                             const Eigen::MatrixXd& x, InstanceCache* cache) {
  const auto& cfg = model.config();
  const auto layers = model.layers();
  const std::size_t convs = cfg.conv_count();
  Eigen::MatrixXd h = x;
  for (std::size_t k = 0; k < convs; ++k) {
    Eigen::MatrixXd p = prop.apply(h);
    Eigen::MatrixXd z = p * layers[k].weights;
    z.rowwise() += layers[k].bias.transpose();
    const bool last = cfg.task == TaskKind::Node && k + 1 == convs;
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->aggregated.push_back(std::move(p));
    }
    if (last) {
      if (cache) cache->preact.push_back(z);
      return z;
    }
    h = relu(z);
    if (cache) cache->preact.push_back(std::move(z));
  }
  const Eigen::RowVectorXd pooled = h.colwise().mean();
  Eigen::RowVectorXd out = pooled * layers.back().weights + layers.back().bias.transpose();
  if (cache) cache->pooled = pooled;
  return out;
}

ForwardCache run_forward(const GnnModel& model, const Graph& graph, const FeatureSet& features,
                         std::span<const double> edge_weights,
                         std::span<const std::size_t> graphs, bool keep) {
  check_inputs(model, graph, features);
  ForwardCache cache;
  cache.model = &model;
  cache.generation = model.generation();
  cache.graph = &graph;
  cache.propagation = Propagation(graph, edge_weights);
  cache.instances = resolve_instances(model, graph, features, graphs);

  const auto classes = model.config().num_classes();
  if (model.config().task == TaskKind::Node) {
    InstanceCache act;
    cache.logits = run_instance(model, cache.propagation, features.front(), keep ? &act : nullptr);
    if (keep) cache.activations.push_back(std::move(act));
  } else {
    cache.logits.resize(static_cast<Eigen::Index>(cache.instances.size()), classes);
    for (std::size_t i = 0; i < cache.instances.size(); ++i) {
      InstanceCache act;
      cache.logits.row(static_cast<Eigen::Index>(i)) =
          run_instance(model, cache.propagation, features[cache.instances[i]],
                       keep ? &act : nullptr);
      if (keep) cache.activations.push_back(std::move(act));
    }
  }
  return cache;
}

}  // namespace

ForwardCache forward(const GnnModel& model, const Graph& graph, const FeatureSet& features,
                     std::span<const double> edge_weights, std::span<const std::size_t> graphs) {
  return run_forward(model, graph, features, edge_weights, graphs, true);
}

Eigen::MatrixXd predict_logits(const GnnModel& model, const Graph& graph,
                               const FeatureSet& features, std::span<const double> edge_weights,
                               std::span<const std::size_t> graphs) {
  return run_forward(model, graph, features, edge_weights, graphs, false).logits;
}

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  return log_softmax_rows(logits).array().exp().matrix();
}

LossGrad cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                       std::span<const std::size_t> rows) {
  if (labels.size() != static_cast<std::size_t>(logits.rows())) {
    throw std::invalid_argument("label count does not match logit rows");
  }
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  const Eigen::MatrixXd logp = log_softmax_rows(logits);
  LossGrad out{0.0, Eigen::MatrixXd::Zero(logits.rows(), logits.cols())};
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    const int label = labels[r];
    if (label < 0 || label >= logits.cols()) {
      throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(logits.cols()) + ")");
    }
    const auto ri = static_cast<Eigen::Index>(r);
    out.value -= logp(ri, label);
    out.dlogits.row(ri) = logp.row(ri).array().exp() * scale;
    out.dlogits(ri, label) -= scale;
  }
  out.value *= scale;
  return out;
}

LossGrad kl_to_target(const Eigen::MatrixXd& target, const Eigen::MatrixXd& logits) {
  if (target.rows() != logits.rows() || target.cols() != logits.cols()) {
    throw std::invalid_argument("target shape does not match logits");
  }
  const Eigen::MatrixXd logp = log_softmax_rows(logits);
  LossGrad out{0.0, Eigen::MatrixXd(logits.rows(), logits.cols())};
  for (Eigen::Index r = 0; r < target.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      const double t = target(r, c);
      if (!(t >= 0.0)) throw std::invalid_argument("target row has a negative entry");
      sum += t;
      if (t > 0.0) out.value += t * (std::log(t) - logp(r, c));
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("target row not normalized");
    out.dlogits.row(r) = logp.row(r).array().exp().matrix() - target.row(r);
  }
  return out;
}

// -------------------------------------------------------------- backward

namespace {

struct EdgeAccumulator {
  std::vector<double> coef;  // d/d edge coefficient
  std::vector<double> self;  // d/d self-loop coefficient
};

void check_cache(const GnnModel& model, const ForwardCache& cache) {
  if (cache.model != &model || cache.generation != model.generation()) {
    throw StaleCacheError("forward cache does not match the model's current parameters");
  }
  if (cache.activations.empty()) throw StaleCacheError("forward cache holds no activations");
}

/// Backprop for one instance. `dout` is n×C (node) or 1×C (graph).
void backprop_instance(const GnnModel& model, const ForwardCache& cache, const InstanceCache& act,
                       const Eigen::MatrixXd& dout, Gradients* grads, EdgeAccumulator* edges) {
  const auto& cfg = model.config();
  const auto layers = model.layers();
  const std::size_t convs = cfg.conv_count();
  const auto& prop = cache.propagation;

  Eigen::MatrixXd dz;
  if (cfg.task == TaskKind::Graph) {
    const auto& last = layers.back();
    if (grads) {
      grads->weights.back().noalias() += act.pooled.transpose() * dout;
      grads->biases.back() += dout.transpose();
    }
    const auto n = act.inputs.front().rows();
    const Eigen::RowVectorXd dpooled = dout * last.weights.transpose();
    Eigen::MatrixXd dh = dpooled.replicate(n, 1) / static_cast<double>(n);
    dz = dh.cwiseProduct((act.preact[convs - 1].array() > 0.0).cast<double>().matrix());
  } else {
    dz = dout;
  }

  for (std::size_t k = convs; k-- > 0;) {
    if (grads) {
      grads->weights[k].noalias() += act.aggregated[k].transpose() * dz;
      grads->biases[k] += dz.colwise().sum().transpose();
    }
    const Eigen::MatrixXd dp = dz * layers[k].weights.transpose();
    if (edges) {
      const auto& h = act.inputs[k];
      const auto graph_edges = cache.graph->edges();
      for (std::size_t e = 0; e < graph_edges.size(); ++e) {
        edges->coef[e] += dp.row(graph_edges[e].dst).dot(h.row(graph_edges[e].src));
      }
      for (Eigen::Index v = 0; v < h.rows(); ++v) {
        edges->self[static_cast<std::size_t>(v)] += dp.row(v).dot(h.row(v));
      }
    }
    if (k == 0) break;
    const Eigen::MatrixXd dh = prop.apply_transpose(dp);
    dz = dh.cwiseProduct((act.preact[k - 1].array() > 0.0).cast<double>().matrix());
  }
}

Gradients zero_gradients(const GnnModel& model) {
  Gradients g;
  for (const auto& l : model.layers()) {
    g.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

void run_backward(const GnnModel& model, const ForwardCache& cache, const Eigen::MatrixXd& dlogits,
                  Gradients* grads, EdgeAccumulator* edges) {
  check_cache(model, cache);
  if (dlogits.rows() != cache.logits.rows() || dlogits.cols() != cache.logits.cols()) {
    throw std::invalid_argument("upstream gradient shape does not match logits");
  }
  if (model.config().task == TaskKind::Node) {
    backprop_instance(model, cache, cache.activations.front(), dlogits, grads, edges);
  } else {
    for (std::size_t i = 0; i < cache.instances.size(); ++i) {
      const Eigen::MatrixXd row = dlogits.row(static_cast<Eigen::Index>(i));
      if (row.isZero(0.0)) continue;
      backprop_instance(model, cache, cache.activations[i], row, grads, edges);
    }
  }
}

}  // namespace

Gradients backward(const GnnModel& model, const ForwardCache& cache,
                   const Eigen::MatrixXd& dlogits) {
  Gradients grads = zero_gradients(model);
  run_backward(model, cache, dlogits, &grads, nullptr);
  return grads;
}

Gradients backward(const GnnModel& model, const ForwardCache& cache, std::span<const int> labels,
                   std::span<const std::size_t> rows, double weight_decay) {
  std::vector<int> row_labels;
  if (model.config().task == TaskKind::Graph) {
    // logits rows follow cache.instances; pick their labels
    for (auto g : cache.instances) {
      if (g >= labels.size()) throw std::out_of_range("missing label for graph");
      row_labels.push_back(labels[g]);
    }
    labels = row_labels;
  }
  const auto loss = cross_entropy(cache.logits, labels, rows);
  Gradients grads = backward(model, cache, loss.dlogits);
  if (weight_decay != 0.0) {
    const auto layers = model.layers();
    for (std::size_t k = 0; k < layers.size(); ++k) {
      grads.weights[k] += weight_decay * layers[k].weights;
      grads.biases[k] += weight_decay * layers[k].bias;
    }
  }
  return grads;
}

std::vector<double> backward_edge_weights(const GnnModel& model, const ForwardCache& cache,
                                          const Eigen::MatrixXd& dlogits) {
  const auto& graph = *cache.graph;
  const std::size_t m = graph.edge_count();
  EdgeAccumulator acc{std::vector<double>(m, 0.0), std::vector<double>(graph.node_count(), 0.0)};
  run_backward(model, cache, dlogits, nullptr, &acc);

  const auto& prop = cache.propagation;
  const auto deg = prop.degrees();
  const auto coef = prop.edge_coefficients();
  std::vector<double> ddeg(graph.node_count(), 0.0);
  for (std::size_t v = 0; v < ddeg.size(); ++v) ddeg[v] = -acc.self[v] / (deg[v] * deg[v]);
  for (std::size_t e = 0; e < m; ++e) {
    const auto& edge = graph.edge(e);
    const double g = acc.coef[e] * coef[e];
    ddeg[edge.src] -= 0.5 * g / deg[edge.src];
    ddeg[edge.dst] -= 0.5 * g / deg[edge.dst];
  }
  std::vector<double> dw(m);
  for (std::size_t e = 0; e < m; ++e) {
    const auto& edge = graph.edge(e);
    dw[e] = acc.coef[e] / std::sqrt(deg[edge.src] * deg[edge.dst]) + ddeg[edge.dst];
  }
  return dw;
}

std::vector<double> backward_edge_weights_kl(const GnnModel& model, const ForwardCache& cache,
                                             const Eigen::MatrixXd& target) {
  return backward_edge_weights(model, cache, kl_to_target(target, cache.logits).dlogits);
}

// -------------------------------------------------------------- training

Split split_instances(std::size_t count, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, 2);
  std::shuffle(order.begin(), order.end(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<int> predict_classes(const Eigen::MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                std::span<const std::size_t> rows) {
  const auto pred = predict_classes(logits);
  if (rows.empty()) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
    return pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
  }
  std::size_t hit = 0;
  for (auto r : rows) hit += pred[r] == labels[r];
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

TrainResult train(const TrainConfig& config, const GnnConfig& gnn_config, const Dataset& data) {
  config.validate();
  gnn_config.validate();
  data.validate();
  if (gnn_config.task != data.task) throw std::invalid_argument("model task kind != dataset task");
  if (gnn_config.input_dim() != static_cast<int>(data.feature_dim())) {
    throw std::invalid_argument("model input dim " + std::to_string(gnn_config.input_dim()) +
                                " != feature dim " + std::to_string(data.feature_dim()));
  }
  if (gnn_config.num_classes() != data.labels.num_classes) {
    throw std::invalid_argument("model class count != dataset class count");
  }

  TrainResult result;
  result.model = GnnModel::initialize(gnn_config, config.seed);
  result.split = split_instances(data.instance_count(), config.train_fraction, config.seed);
  auto& model = result.model;
  const auto& labels = data.labels.values;

  Adam adam(model.parameter_count(), config.learning_rate);
  auto rng = make_rng(config.seed, 3);
  const bool graph_task = data.task == TaskKind::Graph;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    if (graph_task && config.batch_size > 0 && config.batch_size < result.split.train.size()) {
      auto order = result.split.train;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
        const auto end = std::min(order.size(), i + config.batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
      }
    } else {
      batches.push_back(result.split.train);
    }

    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      ForwardCache cache;
      Gradients grads;
      double loss = 0.0;
      if (graph_task) {
        cache = forward(model, data.graph, data.features, {}, batch);
        std::vector<int> batch_labels;
        for (auto g : batch) batch_labels.push_back(labels[g]);
        loss = cross_entropy(cache.logits, batch_labels).value;
        grads = backward(model, cache, labels, {}, config.weight_decay);
      } else {
        cache = forward(model, data.graph, data.features);
        loss = cross_entropy(cache.logits, labels, batch).value;
        grads = backward(model, cache, labels, batch, config.weight_decay);
      }
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      Eigen::VectorXd params = model.flatten();
      const Eigen::VectorXd g = grads.flatten();
      adam.step(std::span<double>(params.data(), static_cast<std::size_t>(params.size())),
                std::span<const double>(g.data(), static_cast<std::size_t>(g.size())));
      model.assign(params);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(result.split.train.size()));
  }

  const Eigen::MatrixXd logits = predict_logits(model, data.graph, data.features);
  result.train_accuracy = accuracy(logits, labels, result.split.train);
  result.test_accuracy =
      result.split.test.empty() ? result.train_accuracy : accuracy(logits, labels, result.split.test);
  return result;
}

// ---------------------------------------------------------- persistence

std::string model_to_json(const GnnModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers()) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) row.push_back(l.weights(r, c));
      rows.push_back(std::move(row));
    }
    nlohmann::json bias = nlohmann::json::array();
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) bias.push_back(l.bias(i));
    layers.push_back({{"weights", std::move(rows)}, {"bias", std::move(bias)}});
  }
  nlohmann::json doc = {
      {"config",
       {{"layer_dims", model.config().layer_dims}, {"task_kind", to_string(model.config().task)}}},
      {"layers", std::move(layers)},
  };
  return doc.dump() + "\n";
}

GnnModel model_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    GnnConfig cfg;
    cfg.layer_dims = doc.at("config").at("layer_dims").get<std::vector<int>>();
    cfg.task = task_kind_from_string(doc.at("config").at("task_kind").get<std::string>());
    cfg.validate();
    const auto& layers_json = doc.at("layers");
    if (layers_json.size() != cfg.layer_count()) {
      throw ParseError("model file: layer count does not match config");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k < layers_json.size(); ++k) {
      const auto& lj = layers_json[k];
      const auto rows = lj.at("weights").get<std::vector<std::vector<double>>>();
      const auto bias = lj.at("bias").get<std::vector<double>>();
      const int in = cfg.layer_dims[k], out = cfg.layer_dims[k + 1];
      if (rows.size() != static_cast<std::size_t>(in) ||
          bias.size() != static_cast<std::size_t>(out)) {
        throw ParseError("model file: layer " + std::to_string(k) + " shape mismatch");
      }
      DenseLayer l{Eigen::MatrixXd(in, out), Eigen::VectorXd(out)};
      for (int r = 0; r < in; ++r) {
        if (rows[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(out)) {
          throw ParseError("model file: layer " + std::to_string(k) + " ragged weights");
        }
        for (int c = 0; c < out; ++c) l.weights(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      }
      for (int i = 0; i < out; ++i) l.bias(i) = bias[static_cast<std::size_t>(i)];
      layers.push_back(std::move(l));
    }
    return GnnModel(std::move(cfg), std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const GnnModel& model) {
  write_file_atomic(path, model_to_json(model));
}

GnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace betamask
