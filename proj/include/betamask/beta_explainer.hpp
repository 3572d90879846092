#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "betamask/gnn.hpp"
#include "betamask/graph.hpp"
#include "betamask/rng.hpp"

namespace betamask {

/// log(1 + e^x), stable for large |x|.
double softplus(double x);
/// Inverse of softplus for y > 0.
double inverse_softplus(double y);
double logistic(double x);

/// Log density of Beta(alpha, beta) at m.
///
/// Throws std::domain_error for m outside [0,1], for m == 0 with
/// alpha < 1, and for m == 1 with beta < 1 (the density diverges there).
double beta_log_pdf(double m, double alpha, double beta);

/// ∂/∂alpha and ∂/∂beta of beta_log_pdf at an interior m.
std::pair<double, double> beta_log_pdf_shape_grad(double m, double alpha, double beta);

/// Marsaglia–Tsang Gamma(shape, 1) variate; shapes below 1 use the
/// U^(1/shape) boost.
double sample_gamma(double shape, Rng& rng);

/// Beta(alpha, beta) variate g1/(g1+g2), clamped to [kSampleFloor, 1 − kSampleFloor].
double sample_beta(double alpha, double beta, Rng& rng);

inline constexpr double kSampleFloor = 1e-6;

struct BetaKl {
  double value = 0.0;
  double d_alpha = 0.0;  // ∂/∂q_alpha
  double d_beta = 0.0;   // ∂/∂q_beta
};

/// Closed-form KL(Beta(q_alpha, q_beta) ‖ Beta(p_alpha, p_beta)) and its
/// gradient with respect to the q shapes.
BetaKl kl_beta_beta(double q_alpha, double q_beta, double p_alpha, double p_beta);

/// Per-edge variational parameters, unconstrained. Realized shapes are
/// softplus(a_raw) and softplus(b_raw).
struct BetaEdgeParams {
  std::vector<double> a_raw;
  std::vector<double> b_raw;

  static BetaEdgeParams from_shapes(std::size_t edges, double alpha, double beta);

  std::size_t size() const { return a_raw.size(); }
  double alpha(std::size_t e) const;
  double beta(std::size_t e) const;
  double mean(std::size_t e) const;
};

enum class ExplanationTarget { Predicted, TrueLabel };

/// How the score-function estimator credits an edge. Global weighs every
/// edge's score by the total likelihood; Local (node tasks) only by the
/// likelihood of the nodes the edge can influence.
enum class CreditAssignment { Global, Local };

struct ExplainerConfig {
  double learning_rate = 0.05;
  int epochs = 25;
  double prior_alpha = 0.8;
  double prior_beta = 0.6;
  int samples_per_step = 1;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  /// Graph tasks: instances per likelihood evaluation (0 = all at once).
  /// Every batch draws its own masks; their gradients are summed into one
  /// step per epoch.
  std::size_t graph_batch_size = 0;
  ExplanationTarget target = ExplanationTarget::Predicted;
  CreditAssignment credit = CreditAssignment::Local;

  void validate() const;
};

/// Per-instance output distribution the masked model is matched against.
struct TargetDistribution {
  Eigen::MatrixXd probs;

  /// softmax(f(X, G)) from the frozen model on the full graph.
  static TargetDistribution capture(const GnnModel& model, const Graph& graph,
                                    const FeatureSet& features);
  /// One-hot rows of the true labels.
  static TargetDistribution from_labels(std::span<const int> labels, int num_classes);

  /// Rows for a subset of instances.
  TargetDistribution rows(std::span<const std::size_t> instances) const;
};

struct LikelihoodTerm {
  double value = 0.0;
  std::vector<double> mask_grad;
};

/// −Σ_instances KL(target ‖ softmax(f(X, G, mask))) and its gradient with
/// respect to each mask entry. For graph tasks `graphs` selects the
/// instances (all when empty); `target` must have matching rows.
LikelihoodTerm likelihood_term(const GnnModel& model, const Graph& graph,
                               const FeatureSet& features, std::span<const double> mask,
                               const TargetDistribution& target,
                               std::span<const std::size_t> graphs = {});

/// Per-instance −KL(target_r ‖ softmax(f(X, G, mask))_r).
Eigen::VectorXd instance_likelihoods(const GnnModel& model, const Graph& graph,
                                     const FeatureSet& features, std::span<const double> mask,
                                     const TargetDistribution& target,
                                     std::span<const std::size_t> graphs = {});

/// Value-only version of likelihood_term.
double likelihood_value(const GnnModel& model, const Graph& graph, const FeatureSet& features,
                        std::span<const double> mask, const TargetDistribution& target,
                        std::span<const std::size_t> graphs = {});

/// Log-likelihood of a sampled mask, as used by the score-function estimator.
using LikelihoodFn = std::function<double(std::span<const double> mask)>;

/// Exponential moving average of the likelihood, used as control variate.
struct BaselineState {
  static constexpr double kDecay = 0.9;
  double value = 0.0;
  bool initialized = false;

  void update(double observed) {
    value = initialized ? kDecay * value + (1.0 - kDecay) * observed : observed;
    initialized = true;
  }
};

struct ElboEstimate {
  double elbo = 0.0;
  double likelihood = 0.0;  // mean over samples, after scaling
  double kl = 0.0;          // Σ_edges KL(q_e ‖ prior)
  std::vector<double> grad_a_raw;  // ∂ELBO/∂a_raw (ascent direction)
  std::vector<double> grad_b_raw;
};

/// One Monte-Carlo ELBO evaluation.
///
/// Draws `config.samples_per_step` masks from q. The expected likelihood's
/// gradient is the score-function estimate (L·scale − b)·∇log q(m) with b
/// the EMA baseline from earlier steps; the KL part is analytic. When the
/// baseline is unset, one extra draw initializes it first. The baseline is
/// updated after the gradient is formed. `likelihood_scale` rescales a
/// minibatch likelihood to the full-data sum.
ElboEstimate elbo_step(const BetaEdgeParams& params, const ExplainerConfig& config,
                       const LikelihoodFn& likelihood, Rng& rng, BaselineState& baseline,
                       double likelihood_scale = 1.0);

/// For each edge, the nodes whose output moves with its weight in a model
/// with `conv_layers` convolutions: nodes reachable from the edge's
/// destination in at most conv_layers directed steps (the destination's
/// degree also rescales its outgoing messages).
std::vector<std::vector<NodeId>> edge_receptive_fields(const Graph& graph,
                                                       std::size_t conv_layers);

using InstanceLikelihoodFn = std::function<Eigen::VectorXd(std::span<const double> mask)>;

/// elbo_step with local credit: edge e's score is weighted by
/// Σ_{v ∈ receptive[e]} (L_v − b_v), one EMA baseline per instance. Still
/// unbiased, since instances outside the field do not depend on the edge.
ElboEstimate elbo_step_local(const BetaEdgeParams& params, const ExplainerConfig& config,
                             const InstanceLikelihoodFn& likelihood,
                             const std::vector<std::vector<NodeId>>& receptive, Rng& rng,
                             std::vector<BaselineState>& baselines);

struct ExplanationReport {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> prob;       // posterior means alpha/(alpha+beta)
  std::vector<std::size_t> rank;  // 1 = most important; ties to lower index
  std::vector<double> elbo_trace;  // one value per epoch
  EdgeMask mask;
};

/// Fits the per-edge Beta posteriors against the frozen model, one Adam
/// step per epoch. `labels` is only read when config.target == TrueLabel.
ExplanationReport fit(const ExplainerConfig& config, const GnnModel& model, const Graph& graph,
                      const FeatureSet& features, const LabelVector* labels = nullptr);

/// Right-continuous empirical CDF: (distinct value, fraction <= value).
std::vector<std::pair<double, double>> ecdf(std::span<const double> values);

}  // namespace betamask
