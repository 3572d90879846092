#include "betamask/beta_explainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "betamask/adam.hpp"
#include "betamask/io.hpp"
#include "betamask/special.hpp"

namespace betamask {

double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw std::domain_error("inverse_softplus needs a positive argument");
  if (y > 30.0) return y + std::log(-std::expm1(-y));
  return std::log(std::expm1(y));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void require_shapes(double alpha, double beta, const char* fn) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw std::invalid_argument(std::string(fn) + ": shapes must be positive and finite");
  }
}

// (s − 1) ln x with the 0·ln 0 = 0 convention; s < 1 at x = 0 is a divergence.
double shape_log_term(double s, double x) {
  if (x > 0.0) return (s - 1.0) * std::log(x);
  if (s < 1.0) throw std::domain_error("beta_log_pdf: density diverges at the boundary");
  return s == 1.0 ? 0.0 : -std::numeric_limits<double>::infinity();
}

/// ln of a Gamma(shape, 1) variate, stable for small shapes.
double log_sample_gamma(double shape, Rng& rng) {
  if (shape < 1.0) {
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    return log_sample_gamma(shape + 1.0, rng) + std::log(u) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    const double x = normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = 1.0 - uniform01(rng);
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

}  // namespace

double beta_log_pdf(double m, double alpha, double beta) {
  require_shapes(alpha, beta, "beta_log_pdf");
  if (!(m >= 0.0 && m <= 1.0)) throw std::domain_error("beta_log_pdf: m outside [0,1]");
  return shape_log_term(alpha, m) + shape_log_term(beta, 1.0 - m) -
         special::log_beta(alpha, beta);
}

std::pair<double, double> beta_log_pdf_shape_grad(double m, double alpha, double beta) {
  require_shapes(alpha, beta, "beta_log_pdf_shape_grad");
  if (!(m > 0.0 && m < 1.0)) throw std::domain_error("beta_log_pdf_shape_grad: m outside (0,1)");
  const double psi_sum = special::digamma(alpha + beta);
  return {std::log(m) - special::digamma(alpha) + psi_sum,
          std::log1p(-m) - special::digamma(beta) + psi_sum};
}

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw std::invalid_argument("sample_gamma: shape must be positive");
  return std::exp(log_sample_gamma(shape, rng));
}

double sample_beta(double alpha, double beta, Rng& rng) {
  require_shapes(alpha, beta, "sample_beta");
  const double lg1 = log_sample_gamma(alpha, rng);
  const double lg2 = log_sample_gamma(beta, rng);
  // g1 / (g1 + g2) = logistic(ln g1 − ln g2)
  const double m = logistic(lg1 - lg2);
  return std::clamp(m, kSampleFloor, 1.0 - kSampleFloor);
}

BetaKl kl_beta_beta(double q_alpha, double q_beta, double p_alpha, double p_beta) {
  require_shapes(q_alpha, q_beta, "kl_beta_beta");
  require_shapes(p_alpha, p_beta, "kl_beta_beta");
  using special::digamma;
  using special::trigamma;
  const double q_sum = q_alpha + q_beta;
  const double shift = p_alpha - q_alpha + p_beta - q_beta;
  BetaKl out;
  out.value = special::log_beta(p_alpha, p_beta) - special::log_beta(q_alpha, q_beta) +
              (q_alpha - p_alpha) * digamma(q_alpha) + (q_beta - p_beta) * digamma(q_beta) +
              shift * digamma(q_sum);
  const double tri_sum = trigamma(q_sum);
  out.d_alpha = (q_alpha - p_alpha) * trigamma(q_alpha) + shift * tri_sum;
  out.d_beta = (q_beta - p_beta) * trigamma(q_beta) + shift * tri_sum;
  // Rounding can leave tiny negatives near q == p.
  out.value = std::max(out.value, 0.0);
  return out;
}

// ------------------------------------------------------------ parameters

BetaEdgeParams BetaEdgeParams::from_shapes(std::size_t edges, double alpha, double beta) {
  require_shapes(alpha, beta, "BetaEdgeParams");
  return {std::vector<double>(edges, inverse_softplus(alpha)),
          std::vector<double>(edges, inverse_softplus(beta))};
}

double BetaEdgeParams::alpha(std::size_t e) const { return softplus(a_raw[e]); }
double BetaEdgeParams::beta(std::size_t e) const { return softplus(b_raw[e]); }
double BetaEdgeParams::mean(std::size_t e) const {
  const double a = alpha(e);
  return a / (a + beta(e));
}

void ExplainerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("explainer learning rate must be positive");
  if (epochs < 0) throw std::invalid_argument("explainer epochs must be non-negative");
  require_shapes(prior_alpha, prior_beta, "explainer prior");
  if (samples_per_step < 1) throw std::invalid_argument("samples_per_step must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold must be in [0,1]");
  }
}

// ---------------------------------------------------------------- target

TargetDistribution TargetDistribution::capture(const GnnModel& model, const Graph& graph,
                                               const FeatureSet& features) {
  return {softmax_rows(predict_logits(model, graph, features))};
}

TargetDistribution TargetDistribution::from_labels(std::span<const int> labels, int num_classes) {
  TargetDistribution t{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), num_classes)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw std::out_of_range("label out of range");
    t.probs(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

TargetDistribution TargetDistribution::rows(std::span<const std::size_t> instances) const {
  TargetDistribution t{Eigen::MatrixXd(static_cast<Eigen::Index>(instances.size()), probs.cols())};
  for (std::size_t i = 0; i < instances.size(); ++i) {
    t.probs.row(static_cast<Eigen::Index>(i)) = probs.row(static_cast<Eigen::Index>(instances[i]));
  }
  return t;
}

LikelihoodTerm likelihood_term(const GnnModel& model, const Graph& graph,
                               const FeatureSet& features, std::span<const double> mask,
                               const TargetDistribution& target,
                               std::span<const std::size_t> graphs) {
  const auto cache = forward(model, graph, features, mask, graphs);
  const auto kl = kl_to_target(target.probs, cache.logits);
  LikelihoodTerm out;
  out.value = -kl.value;
  out.mask_grad = backward_edge_weights(model, cache, kl.dlogits);
  for (double& g : out.mask_grad) g = -g;
  return out;
}

double likelihood_value(const GnnModel& model, const Graph& graph, const FeatureSet& features,
                        std::span<const double> mask, const TargetDistribution& target,
                        std::span<const std::size_t> graphs) {
  return -kl_to_target(target.probs, predict_logits(model, graph, features, mask, graphs)).value;
}

Eigen::VectorXd instance_likelihoods(const GnnModel& model, const Graph& graph,
                                     const FeatureSet& features, std::span<const double> mask,
                                     const TargetDistribution& target,
                                     std::span<const std::size_t> graphs) {
  const Eigen::MatrixXd logp = log_softmax_rows(predict_logits(model, graph, features, mask, graphs));
  if (logp.rows() != target.probs.rows() || logp.cols() != target.probs.cols()) {
    throw std::invalid_argument("target shape does not match logits");
  }
  Eigen::VectorXd out(logp.rows());
  for (Eigen::Index r = 0; r < logp.rows(); ++r) {
    double kl = 0.0;
    for (Eigen::Index c = 0; c < logp.cols(); ++c) {
      const double t = target.probs(r, c);
      if (t > 0.0) kl += t * (std::log(t) - logp(r, c));
    }
    out(r) = -kl;
  }
  return out;
}

std::vector<std::vector<NodeId>> edge_receptive_fields(const Graph& graph,
                                                       std::size_t conv_layers) {
  const auto edges = graph.edges();
  auto out_begin = [&](NodeId v) {
    return std::lower_bound(edges.begin(), edges.end(), Edge{v, 0}) - edges.begin();
  };
  std::vector<std::vector<NodeId>> reach(graph.node_count());
  std::vector<int> seen(graph.node_count(), -1);
  for (NodeId w = 0; w < graph.node_count(); ++w) {
    std::vector<NodeId> frontier{w};
    auto& r = reach[w];
    r.push_back(w);
    seen[w] = static_cast<int>(w);
    for (std::size_t hop = 0; hop < conv_layers; ++hop) {
      std::vector<NodeId> next;
      for (NodeId v : frontier) {
        for (auto i = out_begin(v); i < static_cast<std::ptrdiff_t>(edges.size()) &&
                                    edges[static_cast<std::size_t>(i)].src == v;
             ++i) {
          const NodeId y = edges[static_cast<std::size_t>(i)].dst;
          if (seen[y] == static_cast<int>(w)) continue;
          seen[y] = static_cast<int>(w);
          next.push_back(y);
          r.push_back(y);
        }
      }
      frontier = std::move(next);
    }
    std::sort(r.begin(), r.end());
  }
  std::vector<std::vector<NodeId>> out(graph.edge_count());
  for (std::size_t e = 0; e < edges.size(); ++e) out[e] = reach[edges[e].dst];
  return out;
}

// ------------------------------------------------------------------ ELBO

namespace {

/// Shapes and digamma values of the current q, plus score accumulators.
class ScoreAccumulator {
 public:
  explicit ScoreAccumulator(const BetaEdgeParams& params)
      : alpha_(params.size()),
        beta_(params.size()),
        psi_a_(params.size()),
        psi_b_(params.size()),
        psi_ab_(params.size()),
        mask_(params.size()),
        grad_a_(params.size(), 0.0),
        grad_b_(params.size(), 0.0) {
    for (std::size_t e = 0; e < params.size(); ++e) {
      alpha_[e] = params.alpha(e);
      beta_[e] = params.beta(e);
      if (!(alpha_[e] > 0.0) || !(beta_[e] > 0.0)) {
        throw NumericalError("edge " + std::to_string(e) + " has a non-positive Beta shape");
      }
      psi_a_[e] = special::digamma(alpha_[e]);
      psi_b_[e] = special::digamma(beta_[e]);
      psi_ab_[e] = special::digamma(alpha_[e] + beta_[e]);
    }
  }

  std::span<const double> draw(Rng& rng) {
    for (std::size_t e = 0; e < mask_.size(); ++e) mask_[e] = sample_beta(alpha_[e], beta_[e], rng);
    return mask_;
  }

  /// Adds weight·∇_shapes log q_e(m_e) for the last draw.
  void add(std::size_t e, double weight) {
    grad_a_[e] += weight * (std::log(mask_[e]) - psi_a_[e] + psi_ab_[e]);
    grad_b_[e] += weight * (std::log1p(-mask_[e]) - psi_b_[e] + psi_ab_[e]);
  }

  std::size_t size() const { return mask_.size(); }

  /// Averages the score terms over `samples`, subtracts the KL gradient and
  /// maps to raw parameters.
  ElboEstimate finish(const BetaEdgeParams& params, const ExplainerConfig& config,
                      double mean_likelihood, int samples) const {
    ElboEstimate out;
    out.likelihood = mean_likelihood;
    out.grad_a_raw.resize(size());
    out.grad_b_raw.resize(size());
    for (std::size_t e = 0; e < size(); ++e) {
      const auto kl = kl_beta_beta(alpha_[e], beta_[e], config.prior_alpha, config.prior_beta);
      out.kl += kl.value;
      const double ga = grad_a_[e] / samples - kl.d_alpha;
      const double gb = grad_b_[e] / samples - kl.d_beta;
      // d softplus / dx = logistic(x)
      out.grad_a_raw[e] = ga * logistic(params.a_raw[e]);
      out.grad_b_raw[e] = gb * logistic(params.b_raw[e]);
    }
    out.elbo = out.likelihood - out.kl;
    if (!std::isfinite(out.elbo)) throw NumericalError("non-finite ELBO estimate");
    return out;
  }

 private:
  std::vector<double> alpha_, beta_, psi_a_, psi_b_, psi_ab_, mask_, grad_a_, grad_b_;
};

double checked(double l) {
  if (!std::isfinite(l)) throw NumericalError("non-finite likelihood in ELBO step");
  return l;
}

}  // namespace

ElboEstimate elbo_step(const BetaEdgeParams& params, const ExplainerConfig& config,
                       const LikelihoodFn& likelihood, Rng& rng, BaselineState& baseline,
                       double likelihood_scale) {
  ScoreAccumulator acc(params);
  if (!baseline.initialized) baseline.update(checked(likelihood(acc.draw(rng)) * likelihood_scale));

  double sum_l = 0.0;
  for (int s = 0; s < config.samples_per_step; ++s) {
    const double l = checked(likelihood(acc.draw(rng)) * likelihood_scale);
    sum_l += l;
    const double advantage = l - baseline.value;
    for (std::size_t e = 0; e < acc.size(); ++e) acc.add(e, advantage);
  }
  const double mean_l = sum_l / config.samples_per_step;
  auto out = acc.finish(params, config, mean_l, config.samples_per_step);
  baseline.update(mean_l);
  return out;
}

ElboEstimate elbo_step_local(const BetaEdgeParams& params, const ExplainerConfig& config,
                             const InstanceLikelihoodFn& likelihood,
                             const std::vector<std::vector<NodeId>>& receptive, Rng& rng,
                             std::vector<BaselineState>& baselines) {
  if (receptive.size() != params.size()) {
    throw std::invalid_argument("one receptive field per edge is required");
  }
  ScoreAccumulator acc(params);
  auto evaluate = [&](std::span<const double> mask) {
    Eigen::VectorXd l = likelihood(mask);
    checked(l.sum());
    if (static_cast<std::size_t>(l.size()) != baselines.size()) {
      throw std::invalid_argument("one baseline per instance is required");
    }
    return l;
  };
  if (!baselines.empty() && !baselines.front().initialized) {
    const Eigen::VectorXd l = evaluate(acc.draw(rng));
    for (std::size_t v = 0; v < baselines.size(); ++v) baselines[v].update(l(static_cast<Eigen::Index>(v)));
  }

  Eigen::VectorXd sum_l = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(baselines.size()));
  std::vector<double> advantage(baselines.size());
  for (int s = 0; s < config.samples_per_step; ++s) {
    const Eigen::VectorXd l = evaluate(acc.draw(rng));
    sum_l += l;
    for (std::size_t v = 0; v < baselines.size(); ++v) {
      advantage[v] = l(static_cast<Eigen::Index>(v)) - baselines[v].value;
    }
    for (std::size_t e = 0; e < acc.size(); ++e) {
      double a = 0.0;
      for (NodeId v : receptive[e]) a += advantage[v];
      acc.add(e, a);
    }
  }
  sum_l /= config.samples_per_step;
  auto out = acc.finish(params, config, sum_l.sum(), config.samples_per_step);
  for (std::size_t v = 0; v < baselines.size(); ++v) baselines[v].update(sum_l(static_cast<Eigen::Index>(v)));
  return out;
}

// ------------------------------------------------------------------- fit

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   Rng& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (batch_size == 0 || batch_size >= count) return {order};
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < count; i += batch_size) {
    const auto end = std::min(count, i + batch_size);
    std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(i),
                               order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(b.begin(), b.end());
    out.push_back(std::move(b));
  }
  return out;
}

// One step over all instances in batches: each batch draws its own masks
// and keeps its own baseline slot; gradients are summed before the step.
ElboEstimate batched_elbo_step(const BetaEdgeParams& params, const ExplainerConfig& config,
                               const GnnModel& model, const Graph& graph,
                               const FeatureSet& features, const TargetDistribution& target,
                               const std::vector<std::vector<std::size_t>>& batches, Rng& rng,
                               std::vector<BaselineState>& baselines) {
  if (baselines.size() < batches.size()) baselines.resize(batches.size());
  ElboEstimate total;
  total.grad_a_raw.assign(params.size(), 0.0);
  total.grad_b_raw.assign(params.size(), 0.0);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto batch_target = target.rows(batches[b]);
    const auto est = elbo_step(
        params, config,
        [&](std::span<const double> mask) {
          return likelihood_value(model, graph, features, mask, batch_target, batches[b]);
        },
        rng, baselines[b]);
    total.likelihood += est.likelihood;
    for (std::size_t e = 0; e < params.size(); ++e) {
      total.grad_a_raw[e] += est.grad_a_raw[e];
      total.grad_b_raw[e] += est.grad_b_raw[e];
    }
    if (b == 0) total.kl = est.kl;
  }
  // Each per-batch estimate carried the prior term; keep it once.
  const double extra = static_cast<double>(batches.size() - 1);
  for (std::size_t e = 0; e < params.size(); ++e) {
    const auto kl = kl_beta_beta(params.alpha(e), params.beta(e), config.prior_alpha,
                                 config.prior_beta);
    total.grad_a_raw[e] += extra * kl.d_alpha * logistic(params.a_raw[e]);
    total.grad_b_raw[e] += extra * kl.d_beta * logistic(params.b_raw[e]);
  }
  total.elbo = total.likelihood - total.kl;
  return total;
}

}  // namespace

ExplanationReport fit(const ExplainerConfig& config, const GnnModel& model, const Graph& graph,
                      const FeatureSet& features, const LabelVector* labels) {
  config.validate();
  const bool graph_task = model.config().task == TaskKind::Graph;

  TargetDistribution target;
  if (config.target == ExplanationTarget::TrueLabel) {
    if (!labels) throw std::invalid_argument("true-label target needs labels");
    target = TargetDistribution::from_labels(labels->values, model.config().num_classes());
  } else {
    target = TargetDistribution::capture(model, graph, features);
  }
  const std::size_t instances = static_cast<std::size_t>(target.probs.rows());
  const std::size_t m = graph.edge_count();

  auto params = BetaEdgeParams::from_shapes(m, config.prior_alpha, config.prior_beta);
  Adam adam(2 * m, config.learning_rate);
  auto rng = make_rng(config.seed, 4);
  auto batch_rng = make_rng(config.seed, 5);
  BaselineState baseline;
  std::vector<BaselineState> baselines;
  const bool local = !graph_task && config.credit == CreditAssignment::Local;
  std::vector<std::vector<NodeId>> receptive;
  if (local) {
    receptive = edge_receptive_fields(graph, model.config().conv_count());
    baselines.resize(instances);
  }
  const bool batched = graph_task && config.graph_batch_size > 0 &&
                       config.graph_batch_size < instances;

  ExplanationReport report;
  std::vector<double> flat(2 * m), grad(2 * m);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ElboEstimate est;
    auto whole = [&](std::span<const double> mask) {
      return likelihood_value(model, graph, features, mask, target);
    };
    if (local) {
      est = elbo_step_local(
          params, config,
          [&](std::span<const double> mask) {
            return instance_likelihoods(model, graph, features, mask, target);
          },
          receptive, rng, baselines);
    } else if (batched) {
      est = batched_elbo_step(params, config, model, graph, features, target,
                              make_batches(instances, config.graph_batch_size, batch_rng), rng,
                              baselines);
    } else {
      est = elbo_step(params, config, whole, rng, baseline);
    }
    report.elbo_trace.push_back(est.elbo);

    std::copy(params.a_raw.begin(), params.a_raw.end(), flat.begin());
    std::copy(params.b_raw.begin(), params.b_raw.end(), flat.begin() + static_cast<std::ptrdiff_t>(m));
    for (std::size_t e = 0; e < m; ++e) {
      grad[e] = -est.grad_a_raw[e];
      grad[m + e] = -est.grad_b_raw[e];
    }
    adam.step(flat, grad);
    std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(m), params.a_raw.begin());
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(m), flat.end(), params.b_raw.begin());
  }

  report.alpha.resize(m);
  report.beta.resize(m);
  report.prob.resize(m);
  for (std::size_t e = 0; e < m; ++e) {
    report.alpha[e] = params.alpha(e);
    report.beta[e] = params.beta(e);
    if (!(report.alpha[e] > 0.0) || !(report.beta[e] > 0.0)) {
      throw NumericalError("edge " + std::to_string(e) + " ended with a non-positive Beta shape");
    }
    report.prob[e] = report.alpha[e] / (report.alpha[e] + report.beta[e]);
  }
  report.rank = descending_ranks(report.prob);
  report.mask = EdgeMask(report.prob);
  return report;
}

std::vector<std::pair<double, double>> ecdf(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("ecdf of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

}  // namespace betamask
