#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "betamask/baseline_explainer.hpp"
#include "betamask/beta_explainer.hpp"
#include "betamask/datagen.hpp"
#include "betamask/gnn.hpp"

namespace betamask {

using GeneratorConfig = std::variant<MotifDatasetConfig, ExpressionDatasetConfig>;

struct DatasetPreset {
  std::string name;
  GeneratorConfig config;
};

/// sg-base, sg-heterophilic, sg-unfair, sg-moreinform, sg-lessinform, expr-25, expr-50.
const std::vector<std::string>& preset_names();

/// Throws std::invalid_argument for an unknown name.
DatasetPreset dataset_preset(const std::string& name);

Dataset generate(const DatasetPreset& preset);

nlohmann::json config_to_json(const GeneratorConfig& config);
/// Overlays the keys present in `j` onto `base`.
GeneratorConfig config_from_json(const nlohmann::json& j, GeneratorConfig base);

/// Model training hyperparameters per dataset preset.
struct TrainPreset {
  TrainConfig train;
  std::vector<int> hidden;
};

TrainPreset train_preset(const std::string& name);

/// Explainer hyperparameters per dataset preset.
struct ExplainPreset {
  ExplainerConfig beta;
  BaselineConfig baseline;
};

ExplainPreset explain_preset(const std::string& name);

/// Layer sizes [input, hidden..., classes]. For graph tasks the hidden
/// widths are the convolutions and the last map is the pooled readout.
GnnConfig gnn_config_for(const Dataset& data, const std::vector<int>& hidden);

}  // namespace betamask
