#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "betamask/beta_explainer.hpp"
#include "betamask/gnn.hpp"
#include "betamask/graph.hpp"

namespace betamask {

/// Deterministic sigmoid-mask explainer settings.
struct BaselineConfig {
  double learning_rate = 0.01;
  int epochs = 200;
  double size_coefficient = 0.005;
  double entropy_coefficient = 0.1;
  /// Std of the normal logit initialization; 0 starts every edge at 0.5.
  double init_std = 0.1;
  std::uint64_t seed = 0;
  std::size_t graph_batch_size = 0;
  ExplanationTarget target = ExplanationTarget::Predicted;

  void validate() const;
};

/// Unconstrained per-edge logits; the realized mask is logistic(logit).
struct SigmoidMaskParams {
  std::vector<double> logits;

  static SigmoidMaskParams initialize(std::size_t edges, double init_std, std::uint64_t seed);
  std::vector<double> mask() const;
};

/// Binary entropy of logistic(l), computed from the logit.
double binary_entropy_from_logit(double l);

struct BaselineObjective {
  double value = 0.0;
  double kl = 0.0;
  double size_term = 0.0;
  double entropy_term = 0.0;
  std::vector<double> grad;  // d value / d logits
};

/// KL(target ‖ masked output)·kl_scale + size·mean(mask) + entropy·mean(H(mask)).
BaselineObjective baseline_objective(const BaselineConfig& config, const GnnModel& model,
                                     const Graph& graph, const FeatureSet& features,
                                     std::span<const double> logits,
                                     const TargetDistribution& target,
                                     std::span<const std::size_t> graphs = {},
                                     double kl_scale = 1.0);

struct BaselineReport {
  std::vector<double> logits;
  std::vector<double> prob;
  std::vector<std::size_t> rank;
  std::vector<double> loss_trace;  // one value per epoch
  EdgeMask mask;
};

BaselineReport fit_baseline(const BaselineConfig& config, const GnnModel& model,
                            const Graph& graph, const FeatureSet& features,
                            const LabelVector* labels = nullptr);

/// I.i.d. uniform [0,1) weights.
EdgeMask random_mask_baseline(const Graph& graph, std::uint64_t seed);

}  // namespace betamask
