#include "toys.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>

namespace toy {
namespace {

Eigen::RowVector2d hot_feature(std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 0.05);
  return {1.0 + noise(rng), noise(rng)};
}

Eigen::RowVector2d cold_feature(std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 0.05);
  return {noise(rng), 1.0 + noise(rng)};
}

// Hot->cold pairs, cold->cold pairs and isolated nodes of both kinds.
Dataset training_graph(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Edge> edges;
  std::vector<Eigen::RowVector2d> rows;
  std::vector<int> labels;
  auto add = [&](bool hot, int label) {
    rows.push_back(hot ? hot_feature(rng) : cold_feature(rng));
    labels.push_back(label);
    return static_cast<NodeId>(rows.size() - 1);
  };
  for (int i = 0; i < 60; ++i) {
    const NodeId h = add(true, 1);
    const NodeId c = add(false, 1);
    edges.push_back({h, c});
  }
  for (int i = 0; i < 60; ++i) {
    const NodeId a = add(false, 0);
    const NodeId b = add(false, 0);
    edges.push_back({a, b});
    // Some cold receivers get several cold in-neighbors.
    if (i % 3 == 0) edges.push_back({add(false, 0), b});
  }
  for (int i = 0; i < 20; ++i) add(true, 1);
  for (int i = 0; i < 40; ++i) add(false, 0);

  Dataset d;
  d.preset = "planted-train";
  d.task = TaskKind::Node;
  d.graph = Graph::build(edges, rows.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = rows[i];
  d.features = {x};
  d.labels = {labels, 2, TaskKind::Node};
  d.truth = make_ground_truth(d.graph, {});
  return d;
}

std::vector<int> predictions(const GnnModel& model, const Dataset& d,
                             std::span<const double> weights) {
  return predict_classes(predict_logits(model, d.graph, d.features, weights));
}

}  // namespace

PlantedToy make_planted_toy(std::uint64_t seed, std::size_t noise_edges) {
  PlantedToy t;
  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.epochs = 300;
  tc.seed = seed;
  GnnConfig gc{{2, 2}, TaskKind::Node};
  t.model = train(tc, gc, training_graph(seed)).model;

  std::mt19937_64 rng(seed + 1000);
  const std::size_t cold = 20;
  const std::size_t n = 2 + cold;
  std::vector<Edge> edges{{0, 1}};
  std::uniform_int_distribution<NodeId> pick(2, static_cast<NodeId>(n - 1));
  while (edges.size() < noise_edges + 1) {
    const Edge e{pick(rng), pick(rng)};
    if (e.src == e.dst || std::find(edges.begin(), edges.end(), e) != edges.end()) continue;
    edges.push_back(e);
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  x.row(0) = hot_feature(rng);
  for (std::size_t v = 1; v < n; ++v) x.row(static_cast<Eigen::Index>(v)) = cold_feature(rng);

  Dataset& d = t.data;
  d.preset = "planted";
  d.task = TaskKind::Node;
  d.graph = Graph::build(edges, n);
  d.features = {x};
  std::vector<int> labels(n, 0);
  labels[0] = labels[1] = 1;
  d.labels = {labels, 2, TaskKind::Node};
  d.true_edges = {{0, 1}};
  d.truth = make_ground_truth(d.graph, d.true_edges);
  t.planted = d.graph.find(0, 1);
  return t;
}

bool ablation_holds(const PlantedToy& t) {
  const std::size_t m = t.data.graph.edge_count();
  const auto full = predictions(t.model, t.data, {});
  if (full[0] != 1 || full[1] != 1) return false;
  for (std::size_t v = 2; v < full.size(); ++v) {
    if (full[v] != 0) return false;
  }
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> w(m, 1.0);
    w[e] = 0.0;
    const auto ablated = predictions(t.model, t.data, w);
    if (e == t.planted) {
      if (ablated[1] != 0) return false;
    } else if (ablated != full) {
      return false;
    }
  }
  return true;
}

double QuadraticLikelihood::operator()(std::span<const double> m) const {
  return c0 + c1 * m[0] + c2 * m[1] + c12 * m[0] * m[1] + c11 * m[0] * m[0] + c22 * m[1] * m[1];
}

namespace {

struct Moments {
  std::array<double, 3> raw{};    // E[m^k], k = 0..2
  std::array<double, 3> d_a{};    // ∂E[m^k]/∂alpha
  std::array<double, 3> d_b{};
};

Moments beta_moments(double a, double b) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  const boost::math::beta_distribution<double> dist(a, b);
  const double da = boost::math::digamma(a + b) - boost::math::digamma(a);
  const double db = boost::math::digamma(a + b) - boost::math::digamma(b);
  Moments out;
  for (int k = 0; k < 3; ++k) {
    auto mk = [k](double m) { return std::pow(m, k); };
    out.raw[k] = integrator.integrate(
        [&](double m) { return mk(m) * boost::math::pdf(dist, m); }, 0.0, 1.0);
    out.d_a[k] = integrator.integrate(
        [&](double m) { return mk(m) * boost::math::pdf(dist, m) * (std::log(m) + da); }, 0.0,
        1.0);
    out.d_b[k] = integrator.integrate(
        [&](double m) { return mk(m) * boost::math::pdf(dist, m) * (std::log1p(-m) + db); }, 0.0,
        1.0);
  }
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::array<double, 4> quadrature_gradient(const QuadraticLikelihood& l,
                                          const BetaEdgeParams& params) {
  const Moments q1 = beta_moments(params.alpha(0), params.beta(0));
  const Moments q2 = beta_moments(params.alpha(1), params.beta(1));
  // E[L] = Σ c_jk E[m1^j] E[m2^k]; differentiate the factor that owns the shape.
  auto expectation = [&](const std::array<double, 3>& m1, const std::array<double, 3>& m2) {
    return l.c0 * m1[0] * m2[0] + l.c1 * m1[1] * m2[0] + l.c2 * m1[0] * m2[1] +
           l.c12 * m1[1] * m2[1] + l.c11 * m1[2] * m2[0] + l.c22 * m1[0] * m2[2];
  };
  return {expectation(q1.d_a, q2.raw) * sigmoid(params.a_raw[0]),
          expectation(q1.d_b, q2.raw) * sigmoid(params.b_raw[0]),
          expectation(q1.raw, q2.d_a) * sigmoid(params.a_raw[1]),
          expectation(q1.raw, q2.d_b) * sigmoid(params.b_raw[1])};
}

}  // namespace toy
