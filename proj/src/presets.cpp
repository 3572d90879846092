#include "betamask/presets.hpp"

#include <stdexcept>

namespace betamask {

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"sg-base",       "sg-heterophilic", "sg-unfair",
                                                 "sg-moreinform", "sg-lessinform",   "expr-25",
                                                 "expr-50"};
  return names;
}

DatasetPreset dataset_preset(const std::string& name) {
  MotifDatasetConfig m;
  if (name == "sg-base") return {name, m};
  if (name == "sg-heterophilic") {
    m.heterophilic = true;
    return {name, m};
  }
  if (name == "sg-unfair") {
    m.flip_probability = 0.75;
    m.protected_correlation = ProtectedCorrelation::Negative;
    return {name, m};
  }
  if (name == "sg-moreinform") {
    m.informative_features = 8;
    return {name, m};
  }
  if (name == "sg-lessinform") {
    m.total_features = 21;
    return {name, m};
  }
  ExpressionDatasetConfig e;
  if (name == "expr-25") {
    e.sparsity = 0.25;
    return {name, e};
  }
  if (name == "expr-50") {
    e.sparsity = 0.5;
    return {name, e};
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

Dataset generate(const DatasetPreset& preset) {
  Dataset data = std::visit(
      [](const auto& c) {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, MotifDatasetConfig>) {
          return generate_motif_dataset(c);
        } else {
          return generate_expression_dataset(c);
        }
      },
      preset.config);
  data.preset = preset.name;
  return data;
}

namespace {

nlohmann::json network_to_json(const RegulatorNetwork& net) {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : net.links) links.push_back({l.parent, l.child, l.weight});
  return {{"links", links}, {"masters", net.masters}};
}

RegulatorNetwork network_from_json(const nlohmann::json& j) {
  RegulatorNetwork net;
  for (const auto& l : j.at("links")) {
    net.links.push_back({l.at(0).get<NodeId>(), l.at(1).get<NodeId>(), l.at(2).get<double>()});
  }
  net.masters = j.at("masters").get<std::vector<NodeId>>();
  return net;
}

template <typename T>
void overlay(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

nlohmann::json config_to_json(const GeneratorConfig& config) {
  if (const auto* m = std::get_if<MotifDatasetConfig>(&config)) {
    return {{"kind", "motif"},
            {"num_motifs", m->num_motifs},
            {"informative_features", m->informative_features},
            {"total_features", m->total_features},
            {"flip_probability", m->flip_probability},
            {"protected_correlation",
             m->protected_correlation == ProtectedCorrelation::Negative ? "negative" : "none"},
            {"heterophilic", m->heterophilic},
            {"seed", m->seed}};
  }
  const auto& e = std::get<ExpressionDatasetConfig>(config);
  nlohmann::json j = {{"kind", "expression"},
                      {"num_genes", e.num_genes},
                      {"cells_per_class", e.cells_per_class},
                      {"sparsity", e.sparsity},
                      {"correlation_threshold", e.correlation_threshold},
                      {"num_masters", e.num_masters},
                      {"master_low", e.master_low},
                      {"master_high", e.master_high},
                      {"noise_std", e.noise_std},
                      {"mean_out_degree", e.mean_out_degree},
                      {"weight_min", e.weight_min},
                      {"weight_max", e.weight_max},
                      {"seed", e.seed}};
  if (e.network) j["network"] = network_to_json(*e.network);
  return j;
}

GeneratorConfig config_from_json(const nlohmann::json& j, GeneratorConfig base) {
  if (auto* m = std::get_if<MotifDatasetConfig>(&base)) {
    overlay(j, "num_motifs", m->num_motifs);
    overlay(j, "informative_features", m->informative_features);
    overlay(j, "total_features", m->total_features);
    overlay(j, "flip_probability", m->flip_probability);
    overlay(j, "heterophilic", m->heterophilic);
    overlay(j, "seed", m->seed);
    if (j.contains("protected_correlation")) {
      const auto s = j.at("protected_correlation").get<std::string>();
      if (s == "negative") m->protected_correlation = ProtectedCorrelation::Negative;
      else if (s == "none") m->protected_correlation = ProtectedCorrelation::None;
      else throw std::invalid_argument("protected_correlation must be none or negative");
    }
    return base;
  }
  auto& e = std::get<ExpressionDatasetConfig>(base);
  overlay(j, "num_genes", e.num_genes);
  overlay(j, "cells_per_class", e.cells_per_class);
  overlay(j, "sparsity", e.sparsity);
  overlay(j, "correlation_threshold", e.correlation_threshold);
  overlay(j, "num_masters", e.num_masters);
  overlay(j, "master_low", e.master_low);
  overlay(j, "master_high", e.master_high);
  overlay(j, "noise_std", e.noise_std);
  overlay(j, "mean_out_degree", e.mean_out_degree);
  overlay(j, "weight_min", e.weight_min);
  overlay(j, "weight_max", e.weight_max);
  overlay(j, "seed", e.seed);
  if (j.contains("network")) e.network = network_from_json(j.at("network"));
  return base;
}

TrainPreset train_preset(const std::string& name) {
  TrainPreset p;
  p.hidden = {16};
  auto& t = p.train;
  t.epochs = 2000;
  if (name == "sg-base") {
    t.learning_rate = 0.16, t.weight_decay = 1e-4, t.seed = 1;
  } else if (name == "sg-heterophilic") {
    t.learning_rate = 0.1, t.weight_decay = 5e-5, t.seed = 10;
  } else if (name == "sg-unfair") {
    t.learning_rate = 0.15, t.weight_decay = 1e-4, t.seed = 4;
  } else if (name == "sg-lessinform") {
    t.learning_rate = 0.05, t.weight_decay = 1e-3, t.seed = 1000;
  } else if (name == "sg-moreinform") {
    t.learning_rate = 0.05, t.weight_decay = 1e-3, t.seed = 400;
  } else if (name == "expr-25" || name == "expr-50") {
    t.learning_rate = 0.001, t.weight_decay = 0.0, t.seed = 200, t.epochs = 50;
    t.batch_size = 32;
    p.hidden = {16, 16};
  } else {
    throw std::invalid_argument("no training preset for '" + name + "'");
  }
  return p;
}

ExplainPreset explain_preset(const std::string& name) {
  ExplainPreset p;
  auto& b = p.beta;
  auto& g = p.baseline;
  b.learning_rate = 0.05, b.epochs = 25;
  g.learning_rate = 1e-5, g.epochs = 200;
  if (name == "sg-base" || name == "sg-unfair") {
    b.prior_alpha = 0.8, b.prior_beta = 0.6;
  } else if (name == "sg-heterophilic") {
    b.prior_alpha = 0.7, b.prior_beta = 0.6;
  } else if (name == "sg-lessinform") {
    b.prior_alpha = 0.6, b.prior_beta = 0.6;
  } else if (name == "sg-moreinform") {
    b.prior_alpha = 0.8, b.prior_beta = 0.8;
  } else if (name == "expr-25") {
    b.learning_rate = 0.001, b.prior_alpha = 0.55, b.prior_beta = 0.65;
    g.learning_rate = 1e-5, g.epochs = 300, g.graph_batch_size = 300;
  } else if (name == "expr-50") {
    b.learning_rate = 0.01, b.prior_alpha = 0.5, b.prior_beta = 0.95;
    g.learning_rate = 1e-4, g.epochs = 300, g.graph_batch_size = 859;
  } else {
    throw std::invalid_argument("no explainer preset for '" + name + "'");
  }
  return p;
}

GnnConfig gnn_config_for(const Dataset& data, const std::vector<int>& hidden) {
  GnnConfig c;
  c.task = data.task;
  c.layer_dims.push_back(static_cast<int>(data.feature_dim()));
  c.layer_dims.insert(c.layer_dims.end(), hidden.begin(), hidden.end());
  c.layer_dims.push_back(data.labels.num_classes);
  return c;
}

}  // namespace betamask
