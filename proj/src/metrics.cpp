#include "betamask/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace betamask {

const char* to_string(FnMode mode) {
  return mode == FnMode::GraphOnly ? "graph-only" : "include-absent";
}

FnMode fn_mode_from_string(const std::string& name) {
  if (name == "graph-only") return FnMode::GraphOnly;
  if (name == "include-absent") return FnMode::IncludeAbsent;
  throw std::invalid_argument("unknown fn mode '" + name + "'");
}

ConfusionCounts confusion(const EdgeMask& mask, const GroundTruth& truth, double threshold,
                          FnMode mode) {
  if (mask.size() != truth.important.size()) {
    throw std::invalid_argument("mask and ground truth lengths differ");
  }
  ConfusionCounts c;
  c.mode = mode;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool predicted = mask[i] >= threshold;
    const bool actual = truth.important[i] != 0;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  if (mode == FnMode::IncludeAbsent) c.fn += truth.absent_true_edges.size();
  return c;
}

double jaccard(const ConfusionCounts& c) {
  return static_cast<double>(c.tp) / (static_cast<double>(c.tp + c.fp + c.fn) + 1e-9);
}

double f1(const ConfusionCounts& c) {
  if (c.tp == 0) return 0.0;
  const double p = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double r = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return 2.0 * p * r / (p + r);
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("accuracy of an empty evaluation");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double unfaithfulness(const GnnModel& model, const Graph& graph, const FeatureSet& features,
                      const EdgeMask& mask, double threshold, KlAggregation aggregation) {
  const Eigen::MatrixXd full = log_softmax_rows(predict_logits(model, graph, features));
  const Graph sub = induce_subgraph(graph, mask, threshold);
  const Eigen::MatrixXd masked = log_softmax_rows(predict_logits(model, sub, features));
  double kl = 0.0;
  for (Eigen::Index r = 0; r < full.rows(); ++r) {
    for (Eigen::Index k = 0; k < full.cols(); ++k) {
      const double p = std::exp(full(r, k));
      if (p > 0.0) kl += p * (full(r, k) - masked(r, k));
    }
  }
  if (aggregation == KlAggregation::Mean && full.rows() > 0) {
    kl /= static_cast<double>(full.rows());
  }
  kl = std::max(kl, 0.0);
  if (!std::isfinite(kl)) throw NumericalError("non-finite KL in unfaithfulness");
  return -std::expm1(-kl);
}

KhopEvaluation best_khop_subgraph_eval(const Dataset& data, const EdgeMask& mask, int hops,
                                       double threshold, FnMode mode) {
  if (data.task != TaskKind::Node) {
    throw std::invalid_argument("neighborhood evaluation needs a node-task dataset");
  }
  if (mask.size() != data.graph.edge_count()) {
    throw std::invalid_argument("mask length does not match the edge count");
  }
  KhopEvaluation out;
  for (NodeId v = 0; v < data.graph.node_count(); ++v) {
    const auto k = khop_subgraph(data.graph, v, hops);
    if (k.edge_index.empty()) continue;
    KhopNodeScore s;
    s.node = v;
    s.counts.mode = mode;
    for (std::size_t e : k.edge_index) {
      const bool predicted = mask[e] >= threshold;
      const bool actual = data.truth.important[e] != 0;
      if (predicted && actual) ++s.counts.tp;
      else if (predicted) ++s.counts.fp;
      else if (actual) ++s.counts.fn;
      else ++s.counts.tn;
    }
    if (mode == FnMode::IncludeAbsent) {
      for (const auto& e : data.truth.absent_true_edges) {
        if (std::binary_search(k.nodes.begin(), k.nodes.end(), e.src) &&
            std::binary_search(k.nodes.begin(), k.nodes.end(), e.dst)) {
          ++s.counts.fn;
        }
      }
    }
    s.jaccard = jaccard(s.counts);
    s.f1 = f1(s.counts);
    if (out.per_node.empty() || s.jaccard > out.per_node[out.best].jaccard) {
      out.best = out.per_node.size();
    }
    out.per_node.push_back(s);
  }
  if (out.per_node.empty()) throw std::invalid_argument("every neighborhood is empty");
  return out;
}

std::string significance_bucket(double p) {
  if (p <= 1e-4) return "****";
  if (p <= 1e-3) return "***";
  if (p <= 0.01) return "**";
  if (p <= 0.05) return "*";
  return "ns";
}

namespace {

// counts[u] = number of orderings of n1 + n2 distinct values with U_1 = u.
std::vector<double> u_distribution(std::size_t n1, std::size_t n2) {
  const std::size_t max_u = n1 * n2;
  // table[i][j] is the distribution for sizes (i, j)
  std::vector<std::vector<std::vector<double>>> table(
      n1 + 1, std::vector<std::vector<double>>(n2 + 1));
  for (std::size_t i = 0; i <= n1; ++i) {
    for (std::size_t j = 0; j <= n2; ++j) {
      auto& d = table[i][j];
      d.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        d[0] = 1.0;
        continue;
      }
      // Largest value belongs to sample 1 (adds j to U) or to sample 2.
      const auto& from1 = table[i - 1][j];
      const auto& from2 = table[i][j - 1];
      for (std::size_t u = 0; u < from1.size(); ++u) d[u + j] += from1[u];
      for (std::size_t u = 0; u < from2.size(); ++u) d[u] += from2[u];
    }
  }
  auto out = table[n1][n2];
  out.resize(max_u + 1, 0.0);
  return out;
}

}  // namespace

SignificanceResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("Mann-Whitney needs non-empty samples");
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t n = n1 + n2;

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double x : a) pooled.push_back({x, 0});
  for (double x : b) pooled.push_back({x, 1});
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_a += midrank;
    }
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  SignificanceResult r;
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  r.u = rank_sum_a - dn1 * (dn1 + 1.0) / 2.0;

  if (n <= 12 && tie_term == 0.0) {
    const auto dist = u_distribution(n1, n2);
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto u = static_cast<std::size_t>(std::llround(r.u));
    const double lower = std::accumulate(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(u + 1), 0.0);
    const double upper = std::accumulate(dist.begin() + static_cast<std::ptrdiff_t>(u), dist.end(), 0.0);
    r.p = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    r.exact = true;
  } else {
    const double dn = static_cast<double>(n);
    const double mean = dn1 * dn2 / 2.0;
    const double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var <= 0.0) {
      r.p = 1.0;
    } else {
      const double z = std::max(0.0, std::abs(r.u - mean) - 0.5) / std::sqrt(var);
      r.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    }
  }
  r.bucket = significance_bucket(r.p);
  return r;
}

std::vector<double> scale_probs_for_display(std::span<const double> probs,
                                            const std::vector<bool>& accepted) {
  if (probs.size() != accepted.size()) throw std::invalid_argument("length mismatch");
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!accepted[i]) continue;
    lo = any ? std::min(lo, probs[i]) : probs[i];
    hi = any ? std::max(hi, probs[i]) : probs[i];
    any = true;
  }
  if (!any) throw std::invalid_argument("no accepted probabilities to scale");
  std::vector<double> out(probs.size(), 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!accepted[i]) continue;
    out[i] = hi > lo ? (probs[i] - lo + 1e-5) / (hi - lo) : 1.0;
  }
  return out;
}

}  // namespace betamask
