#include "betamask/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "betamask/gnn.hpp"
#include "betamask/rng.hpp"

namespace betamask {

void Dataset::validate() const {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  if (truth.important.size() != graph.edge_count()) {
    throw std::invalid_argument("ground truth length does not match the edge count");
  }
  if (labels.task != task) throw std::invalid_argument("label task kind disagrees with dataset");
  if (task == TaskKind::Node) {
    if (features.size() != 1) throw std::invalid_argument("node task needs one feature matrix");
    if (labels.values.size() != graph.node_count()) {
      throw std::invalid_argument("node task needs one label per node");
    }
  } else if (labels.values.size() != features.size()) {
    throw std::invalid_argument("graph task needs one label per feature matrix");
  }
  for (const auto& f : features) {
    if (f.rows() != n) throw std::invalid_argument("feature rows do not match node count");
    if (f.cols() != features.front().cols()) {
      throw std::invalid_argument("feature matrices differ in width");
    }
  }
  for (int y : labels.values) {
    if (y < 0 || y >= labels.num_classes) throw std::invalid_argument("label out of range");
  }
}

// ------------------------------------------------------------ motif graphs

void MotifDatasetConfig::validate() const {
  if (num_motifs < 2) throw std::invalid_argument("motif datasets need at least 2 motifs");
  if (informative_features < 0 || total_features < 1 ||
      informative_features > total_features) {
    throw std::invalid_argument("informative features must lie in [0, total features]");
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw std::invalid_argument("flip probability must be in [0,1]");
  }
}

std::vector<int> motif_of_nodes(std::size_t node_count, std::size_t num_motifs) {
  std::vector<int> out(node_count, kNoMotif);
  for (std::size_t v = 0; v < std::min(node_count, 5 * num_motifs); ++v) {
    out[v] = static_cast<int>(v / 5);
  }
  return out;
}

namespace {

void add_undirected(std::vector<Edge>& edges, NodeId a, NodeId b) {
  edges.push_back({a, b});
  edges.push_back({b, a});
}

std::vector<int> motif_count_labels(const Graph& graph, const std::vector<int>& motif_of) {
  std::vector<std::set<int>> seen(graph.node_count());
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    if (motif_of[v] != kNoMotif) seen[v].insert(motif_of[v]);
  }
  for (const auto& e : graph.edges()) {
    if (motif_of[e.src] != kNoMotif) seen[e.dst].insert(motif_of[e.src]);
    if (motif_of[e.dst] != kNoMotif) seen[e.src].insert(motif_of[e.dst]);
  }
  std::vector<int> labels(graph.node_count());
  for (std::size_t v = 0; v < labels.size(); ++v) {
    const auto c = seen[v].size();
    if (c < 1 || c > 2) {
      throw std::invalid_argument("node " + std::to_string(v) + " sees " + std::to_string(c) +
                                  " motifs");
    }
    labels[v] = static_cast<int>(c) - 1;
  }
  return labels;
}

struct MotifLayout {
  std::vector<Edge> edges;
  std::vector<Edge> motif_edges;
  std::size_t node_count = 0;
};

std::size_t pick(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Joins a random free node of motif `a` to one of motif `b`.
void connect(std::vector<std::vector<NodeId>>& free, std::size_t a, std::size_t b, Rng& rng,
             std::vector<Edge>& edges) {
  auto& fa = free[a];
  auto& fb = free[b];
  const std::size_t ia = pick(fa.size(), rng);
  const std::size_t ib = pick(fb.size(), rng);
  add_undirected(edges, fa[ia], fb[ib]);
  fa.erase(fa.begin() + static_cast<std::ptrdiff_t>(ia));
  fb.erase(fb.begin() + static_cast<std::ptrdiff_t>(ib));
}

// Backbone node i has id 5m + i. Homophilic: the backbone is a chain and
// node i hangs one motif node off it; m motif-to-motif connectors follow.
// Heterophilic: backbone node i joins motif i−1 to motif i (so it sees two
// motifs while its attachment nodes see one); m/2 connectors follow.
// Every connector endpoint sees exactly two motifs.
// Returns false when the connector placement ran out of candidates.
bool try_layout(const MotifDatasetConfig& config, Rng& rng, MotifLayout& out) {
  const std::size_t m = config.num_motifs;
  const auto backbone = [m](std::size_t i) { return static_cast<NodeId>(5 * m + i); };
  out = {};
  out.node_count = 6 * m;

  for (std::size_t i = 0; i < m; ++i) {
    const auto b = static_cast<NodeId>(5 * i);
    const std::pair<int, int> house[] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 0}, {4, 1}};
    for (auto [p, q] : house) add_undirected(out.motif_edges, b + p, b + q);
  }
  out.edges = out.motif_edges;

  // Motif nodes still available as connector endpoints.
  std::vector<std::vector<NodeId>> free(m);
  for (std::size_t i = 0; i < m; ++i) {
    free[i].resize(5);
    std::iota(free[i].begin(), free[i].end(), static_cast<NodeId>(5 * i));
    std::shuffle(free[i].begin(), free[i].end(), rng);
    if (config.heterophilic) {
      add_undirected(out.edges, backbone(i), free[i][0]);
      add_undirected(out.edges, backbone((i + 1) % m), free[i][1]);
      free[i].erase(free[i].begin(), free[i].begin() + 2);
    } else {
      add_undirected(out.edges, backbone(i), free[i][0]);
      if (i + 1 < m) add_undirected(out.edges, backbone(i), backbone(i + 1));
      free[i].erase(free[i].begin());
    }
  }

  const std::size_t connectors =
      config.heterophilic ? static_cast<std::size_t>(std::lround(0.5 * static_cast<double>(m))) : m;
  for (std::size_t c = 0; c < connectors; ++c) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < m; ++i) {
      if (!free[i].empty()) open.push_back(i);
    }
    if (open.size() < 2) return false;
    const std::size_t a = pick(open.size(), rng);
    std::size_t b = pick(open.size() - 1, rng);
    if (b >= a) ++b;
    connect(free, open[a], open[b], rng, out.edges);
  }
  return true;
}

}  // namespace

double cross_label_connector_fraction(const Dataset& data) {
  std::size_t connectors = 0;
  std::size_t cross = 0;
  for (std::size_t i = 0; i < data.graph.edge_count(); ++i) {
    if (data.truth.important[i]) continue;
    const auto& e = data.graph.edge(i);
    ++connectors;
    if (data.labels.values[e.src] != data.labels.values[e.dst]) ++cross;
  }
  return connectors == 0 ? 0.0 : static_cast<double>(cross) / static_cast<double>(connectors);
}

Dataset generate_motif_dataset(const MotifDatasetConfig& config) {
  config.validate();
  constexpr int kMaxAttempts = 50;
  auto rng = make_rng(config.seed, 10);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    MotifLayout layout;
    if (!try_layout(config, rng, layout)) continue;

    Dataset data;
    data.task = TaskKind::Node;
    data.graph = Graph::build(layout.edges, layout.node_count);
    const auto motif_of = motif_of_nodes(layout.node_count, config.num_motifs);
    data.labels = {motif_count_labels(data.graph, motif_of), 2, TaskKind::Node};
    data.true_edges = layout.motif_edges;
    std::sort(data.true_edges.begin(), data.true_edges.end());
    data.truth = make_ground_truth(data.graph, data.true_edges);

    const auto ones = std::count(data.labels.values.begin(), data.labels.values.end(), 1);
    const double frac1 = static_cast<double>(ones) / static_cast<double>(layout.node_count);
    const double cross = cross_label_connector_fraction(data);
    const bool mixing_ok = config.heterophilic ? cross >= 0.7 : cross <= 0.3;
    if (frac1 < 0.2 || frac1 > 0.8 || !mixing_ok) continue;

    auto frng = make_rng(config.seed, 11);
    std::normal_distribution<double> signal_noise(0.0, 0.5);
    std::normal_distribution<double> noise(0.0, 1.0);
    FeatureMatrix x(static_cast<Eigen::Index>(layout.node_count), config.total_features);
    const int protected_dim =
        config.informative_features < config.total_features ? config.informative_features : -1;
    for (std::size_t v = 0; v < layout.node_count; ++v) {
      const auto r = static_cast<Eigen::Index>(v);
      const int y = data.labels.values[v];
      for (int f = 0; f < config.total_features; ++f) {
        if (f < config.informative_features) {
          x(r, f) = y + signal_noise(frng);
        } else if (f == protected_dim) {
          double p = config.protected_correlation == ProtectedCorrelation::Negative
                         ? 1.0 - y
                         : (uniform01(frng) < 0.5 ? 1.0 : 0.0);
          if (uniform01(frng) < config.flip_probability) p = 1.0 - p;
          x(r, f) = p;
        } else {
          x(r, f) = noise(frng);
        }
      }
    }
    data.features = {std::move(x)};
    data.validate();
    return data;
  }
  throw std::runtime_error("motif generation failed after " + std::to_string(kMaxAttempts) +
                           " attempts (seed " + std::to_string(config.seed) + ")");
}

// -------------------------------------------------------- expression data

void ExpressionDatasetConfig::validate() const {
  if (num_genes < 2) throw std::invalid_argument("expression data needs at least 2 genes");
  if (cells_per_class < 2) throw std::invalid_argument("need at least 2 cells per class");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("sparsity must be in [0,1]");
  if (!(correlation_threshold > 0.0 && correlation_threshold < 1.0)) {
    throw std::invalid_argument("correlation threshold must be in (0,1)");
  }
  if (noise_std < 0.0) throw std::invalid_argument("noise std must be non-negative");
  if (!(weight_min <= weight_max)) throw std::invalid_argument("weight range is empty");
  if (!network && num_masters > num_genes) {
    throw std::invalid_argument("more master regulators than genes");
  }
}

RegulatorNetwork sample_regulator_network(const ExpressionDatasetConfig& config) {
  config.validate();
  auto rng = make_rng(config.seed, 20);
  std::vector<NodeId> order(config.num_genes);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::shuffle(order.begin(), order.end(), rng);

  RegulatorNetwork net;
  net.masters.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.num_masters));
  std::poisson_distribution<int> degree(config.mean_out_degree);
  std::uniform_real_distribution<double> weight(config.weight_min, config.weight_max);
  const std::size_t first_target = config.num_masters;
  for (std::size_t p = 0; p < order.size(); ++p) {
    const std::size_t lo = std::max(p + 1, first_target);
    if (lo >= order.size()) {
      degree(rng);
      continue;
    }
    std::vector<NodeId> candidates(order.begin() + static_cast<std::ptrdiff_t>(lo), order.end());
    const auto d = std::min<std::size_t>(static_cast<std::size_t>(degree(rng)), candidates.size());
    std::vector<NodeId> chosen;
    std::sample(candidates.begin(), candidates.end(), std::back_inserter(chosen), d, rng);
    for (NodeId child : chosen) net.links.push_back({order[p], child, weight(rng)});
  }
  std::sort(net.links.begin(), net.links.end(), [](const auto& a, const auto& b) {
    return std::tie(a.parent, a.child) < std::tie(b.parent, b.child);
  });
  std::sort(net.masters.begin(), net.masters.end());
  return net;
}

namespace {

std::vector<NodeId> topological_order(std::size_t genes, const std::vector<RegulatorLink>& links) {
  std::vector<std::vector<NodeId>> children(genes);
  std::vector<int> indegree(genes, 0);
  for (const auto& l : links) {
    if (l.parent >= genes || l.child >= genes || l.parent == l.child) {
      throw std::invalid_argument("regulator link outside the gene range or self-regulating");
    }
    children[l.parent].push_back(l.child);
    ++indegree[l.child];
  }
  std::vector<NodeId> order;
  for (NodeId g = 0; g < genes; ++g) {
    if (indegree[g] == 0) order.push_back(g);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (NodeId c : children[order[i]]) {
      if (--indegree[c] == 0) order.push_back(c);
    }
  }
  if (order.size() != genes) throw std::invalid_argument("regulator network has a cycle");
  return order;
}

}  // namespace

Eigen::MatrixXd pearson_columns(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  const Eigen::Index g = x.cols();
  Eigen::MatrixXd r(g, g);
  for (Eigen::Index i = 0; i < g; ++i) {
    for (Eigen::Index j = 0; j < g; ++j) {
      const double denom = std::sqrt(cov(i, i) * cov(j, j));
      r(i, j) = denom > 0.0 ? std::clamp(cov(i, j) / denom, -1.0, 1.0)
                            : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return r;
}

Dataset generate_expression_dataset(const ExpressionDatasetConfig& config) {
  config.validate();
  const RegulatorNetwork net = config.network ? *config.network : sample_regulator_network(config);
  const std::size_t genes = config.num_genes;
  const auto order = topological_order(genes, net.links);

  std::vector<std::vector<std::pair<NodeId, double>>> parents(genes);
  for (const auto& l : net.links) parents[l.child].push_back({l.parent, l.weight});
  std::vector<bool> is_master(genes, false);
  for (NodeId g : net.masters) {
    if (g >= genes) throw std::invalid_argument("master regulator outside the gene range");
    is_master[g] = true;
  }

  const std::size_t cells = 2 * config.cells_per_class;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(genes));
  auto rng = make_rng(config.seed, 21);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<int> labels(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    const int y = c < config.cells_per_class ? 0 : 1;
    labels[c] = y;
    const auto r = static_cast<Eigen::Index>(c);
    for (NodeId g : order) {
      double v = is_master[g] ? (y == 0 ? config.master_low : config.master_high) : 0.0;
      for (auto [p, w] : parents[g]) v += w * x(r, p);
      x(r, g) = v + config.noise_std * noise(rng);
    }
  }
  auto drop_rng = make_rng(config.seed, 22);
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (Eigen::Index g = 0; g < x.cols(); ++g) {
      if (uniform01(drop_rng) < config.sparsity) x(c, g) = 0.0;
    }
  }

  Dataset data;
  data.task = TaskKind::Graph;
  const Eigen::MatrixXd corr = pearson_columns(x);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < genes; ++i) {
    if (std::isnan(corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)))) {
      data.warnings.push_back("gene " + std::to_string(i) +
                              " has zero variance and is left out of the correlation graph");
      continue;
    }
    for (std::size_t j = i + 1; j < genes; ++j) {
      const double r = corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (!std::isnan(r) && std::abs(r) >= config.correlation_threshold) {
        add_undirected(edges, static_cast<NodeId>(i), static_cast<NodeId>(j));
      }
    }
  }
  data.graph = Graph::build(std::move(edges), genes);
  for (const auto& l : net.links) data.true_edges.push_back({l.parent, l.child});
  data.truth = make_ground_truth(data.graph, data.true_edges);
  data.labels = {labels, 2, TaskKind::Graph};
  data.features.reserve(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    data.features.push_back(x.row(static_cast<Eigen::Index>(c)).transpose());
  }
  data.validate();
  return data;
}

double logistic_probe_accuracy(const Dataset& data, std::uint64_t seed) {
  if (data.task != TaskKind::Graph) throw std::invalid_argument("probe needs a graph-task dataset");
  const auto n = static_cast<Eigen::Index>(data.features.size());
  const Eigen::Index d = data.features.front().size();
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = data.features[static_cast<std::size_t>(i)].reshaped().transpose();
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) x.col(j) /= sd;
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = data.labels.values[static_cast<std::size_t>(i)];

  const auto split = split_instances(static_cast<std::size_t>(n), 0.7, seed);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  const double lr = 0.5;
  const double l2 = 1e-3;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd gw = l2 * w;
    double gb = 0.0;
    const double inv = 1.0 / static_cast<double>(split.train.size());
    for (std::size_t i : split.train) {
      const auto r = static_cast<Eigen::Index>(i);
      const double z = x.row(r).dot(w) + b;
      const double err = 1.0 / (1.0 + std::exp(-z)) - y(r);
      gw += inv * err * x.row(r).transpose();
      gb += inv * err;
    }
    w -= lr * gw;
    b -= lr * gb;
  }
  std::size_t correct = 0;
  for (std::size_t i : split.test) {
    const auto r = static_cast<Eigen::Index>(i);
    correct += ((x.row(r).dot(w) + b) >= 0.0) == (y(r) > 0.5);
  }
  return split.test.empty() ? 0.0
                            : static_cast<double>(correct) / static_cast<double>(split.test.size());
}

}  // namespace betamask
