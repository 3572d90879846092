#include "betamask/baseline_explainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "betamask/adam.hpp"
#include "betamask/io.hpp"
#include "betamask/rng.hpp"

namespace betamask {

void BaselineConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("baseline learning rate must be positive");
  if (epochs < 0) throw std::invalid_argument("baseline epochs must be non-negative");
  if (size_coefficient < 0.0 || entropy_coefficient < 0.0) {
    throw std::invalid_argument("regularizer coefficients must be non-negative");
  }
  if (init_std < 0.0) throw std::invalid_argument("init_std must be non-negative");
}

SigmoidMaskParams SigmoidMaskParams::initialize(std::size_t edges, double init_std,
                                                std::uint64_t seed) {
  SigmoidMaskParams p{std::vector<double>(edges, 0.0)};
  if (init_std > 0.0) {
    auto rng = make_rng(seed, 6);
    std::normal_distribution<double> normal(0.0, init_std);
    for (double& l : p.logits) l = normal(rng);
  }
  return p;
}

std::vector<double> SigmoidMaskParams::mask() const {
  std::vector<double> m(logits.size());
  std::transform(logits.begin(), logits.end(), m.begin(), logistic);
  return m;
}

double binary_entropy_from_logit(double l) {
  const double m = logistic(l);
  return m * softplus(-l) + (1.0 - m) * softplus(l);
}

BaselineObjective baseline_objective(const BaselineConfig& config, const GnnModel& model,
                                     const Graph& graph, const FeatureSet& features,
                                     std::span<const double> logits,
                                     const TargetDistribution& target,
                                     std::span<const std::size_t> graphs, double kl_scale) {
  const std::size_t n = logits.size();
  if (n != graph.edge_count()) throw std::invalid_argument("logit count does not match edges");
  std::vector<double> mask(n);
  std::transform(logits.begin(), logits.end(), mask.begin(), logistic);

  const auto cache = forward(model, graph, features, mask, graphs);
  const auto kl = kl_to_target(target.probs, cache.logits);
  const auto dmask = backward_edge_weights(model, cache, kl.dlogits);

  BaselineObjective out;
  out.kl = kl.value * kl_scale;
  out.grad.resize(n);
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    const double l = logits[e];
    const double dsig = logistic(l) * logistic(-l);
    out.size_term += mask[e];
    out.entropy_term += binary_entropy_from_logit(l);
    out.grad[e] = (kl_scale * dmask[e] + config.size_coefficient * inv_n) * dsig -
                  config.entropy_coefficient * inv_n * l * dsig;
  }
  out.size_term *= config.size_coefficient * inv_n;
  out.entropy_term *= config.entropy_coefficient * inv_n;
  out.value = out.kl + out.size_term + out.entropy_term;
  if (!std::isfinite(out.value)) throw NumericalError("non-finite baseline objective");
  return out;
}

BaselineReport fit_baseline(const BaselineConfig& config, const GnnModel& model,
                            const Graph& graph, const FeatureSet& features,
                            const LabelVector* labels) {
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

  auto params = SigmoidMaskParams::initialize(graph.edge_count(), config.init_std, config.seed);
  Adam adam(params.logits.size(), config.learning_rate);
  auto batch_rng = make_rng(config.seed, 7);
  std::vector<std::size_t> order(instances);
  std::iota(order.begin(), order.end(), std::size_t{0});

  BaselineReport report;
  const bool batched = graph_task && config.graph_batch_size > 0 &&
                       config.graph_batch_size < instances;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (!batched) {
      const auto obj = baseline_objective(config, model, graph, features, params.logits, target);
      adam.step(params.logits, obj.grad);
      report.loss_trace.push_back(obj.value);
      continue;
    }
    std::shuffle(order.begin(), order.end(), batch_rng);
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t i = 0; i < instances; i += config.graph_batch_size) {
      std::vector<std::size_t> batch(
          order.begin() + static_cast<std::ptrdiff_t>(i),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(instances, i + config.graph_batch_size)));
      std::sort(batch.begin(), batch.end());
      const double scale = static_cast<double>(instances) / static_cast<double>(batch.size());
      const auto obj = baseline_objective(config, model, graph, features, params.logits,
                                          target.rows(batch), batch, scale);
      adam.step(params.logits, obj.grad);
      total += obj.value;
      ++steps;
    }
    report.loss_trace.push_back(total / static_cast<double>(steps));
  }

  report.logits = params.logits;
  report.prob = params.mask();
  report.rank = descending_ranks(report.prob);
  report.mask = EdgeMask(report.prob);
  return report;
}

EdgeMask random_mask_baseline(const Graph& graph, std::uint64_t seed) {
  auto rng = make_rng(seed, 8);
  std::vector<double> w(graph.edge_count());
  for (double& x : w) x = uniform01(rng);
  return EdgeMask(std::move(w));
}

}  // namespace betamask
