#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "betamask/baseline_explainer.hpp"
#include "betamask/beta_explainer.hpp"
#include "betamask/metrics.hpp"
#include "betamask/presets.hpp"
#include "cli.hpp"

namespace py = pybind11;
using namespace betamask;

namespace {

std::vector<std::pair<NodeId, NodeId>> edge_pairs(const Graph& g) {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(g.edge_count());
  for (const Edge& e : g.edges()) out.emplace_back(e.src, e.dst);
  return out;
}

Dataset generate_py(const std::string& name, std::uint64_t seed, const py::dict& overrides) {
  DatasetPreset preset = dataset_preset(name);
  auto j = config_to_json(preset.config);
  for (const auto& [k, v] : overrides) {
    const auto key = py::str(k).cast<std::string>();
    const auto text = py::module_::import("json").attr("dumps")(v).cast<std::string>();
    j[key] = nlohmann::json::parse(text);
  }
  j["seed"] = seed;
  preset.config = config_from_json(j, preset.config);
  return generate(preset);
}

GnnModel train_py(const Dataset& data, std::optional<int> epochs, std::optional<double> lr,
                  std::optional<std::vector<int>> hidden, std::optional<std::uint64_t> seed) {
  TrainPreset p;
  try {
    p = train_preset(data.preset);
  } catch (const std::invalid_argument&) {
    p.hidden = {16};
  }
  if (epochs) p.train.epochs = *epochs;
  if (lr) p.train.learning_rate = *lr;
  if (hidden) p.hidden = *hidden;
  if (seed) p.train.seed = *seed;
  py::gil_scoped_release release;
  return train(p.train, gnn_config_for(data, p.hidden), data).model;
}

py::dict explain_py(const GnnModel& model, const Dataset& data, const std::string& method,
                    std::uint64_t seed, std::optional<int> epochs, std::optional<double> lr,
                    std::optional<double> alpha, std::optional<double> beta, int samples) {
  ExplainPreset preset;
  try {
    preset = explain_preset(data.preset);
  } catch (const std::invalid_argument&) {
  }
  py::dict out;
  if (method == "beta") {
    auto c = preset.beta;
    c.seed = seed;
    c.samples_per_step = samples;
    if (epochs) c.epochs = *epochs;
    if (lr) c.learning_rate = *lr;
    if (alpha) c.prior_alpha = *alpha;
    if (beta) c.prior_beta = *beta;
    ExplanationReport r;
    {
      py::gil_scoped_release release;
      r = fit(c, model, data.graph, data.features, &data.labels);
    }
    out["prob"] = r.prob;
    out["alpha"] = r.alpha;
    out["beta"] = r.beta;
    out["rank"] = r.rank;
    out["trace"] = r.elbo_trace;
  } else if (method == "gnnx") {
    auto c = preset.baseline;
    c.seed = seed;
    if (epochs) c.epochs = *epochs;
    if (lr) c.learning_rate = *lr;
    BaselineReport r;
    {
      py::gil_scoped_release release;
      r = fit_baseline(c, model, data.graph, data.features, &data.labels);
    }
    out["prob"] = r.prob;
    out["rank"] = r.rank;
    out["trace"] = r.loss_trace;
  } else if (method == "random") {
    const auto m = random_mask_baseline(data.graph, seed);
    out["prob"] = std::vector<double>(m.weights().begin(), m.weights().end());
  } else {
    throw py::value_error("unknown method '" + method + "'");
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_betamask, m) {
  m.doc() = "Edge-mask explainers for graph neural networks";

  py::class_<Graph>(m, "Graph")
      .def(py::init([](const std::vector<std::pair<std::int64_t, std::int64_t>>& edges,
                       std::int64_t node_count) { return Graph::build(edges, node_count); }),
           py::arg("edges"), py::arg("node_count"))
      .def_property_readonly("node_count", &Graph::node_count)
      .def_property_readonly("edge_count", &Graph::edge_count)
      .def("edges", &edge_pairs)
      .def("find", [](const Graph& g, NodeId s, NodeId d) -> std::optional<std::size_t> {
        const auto i = g.find(s, d);
        if (i == Graph::npos) return std::nullopt;
        return i;
      });

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("preset", &Dataset::preset)
      .def_readonly("graph", &Dataset::graph)
      .def_readonly("features", &Dataset::features)
      .def_property_readonly("labels", [](const Dataset& d) { return d.labels.values; })
      .def_property_readonly("num_classes", [](const Dataset& d) { return d.labels.num_classes; })
      .def_property_readonly("task", [](const Dataset& d) { return std::string(to_string(d.task)); })
      .def_property_readonly("important",
                             [](const Dataset& d) {
                               return std::vector<bool>(d.truth.important.begin(),
                                                        d.truth.important.end());
                             })
      .def_readonly("warnings", &Dataset::warnings)
      .def_property_readonly("instance_count", &Dataset::instance_count);

  py::class_<GnnModel>(m, "Model")
      .def_property_readonly("layer_dims", [](const GnnModel& g) { return g.config().layer_dims; })
      .def("to_json", &model_to_json)
      .def_static("from_json", &model_from_json)
      .def("predict", [](const GnnModel& g, const Dataset& d) {
        return predict_classes(predict_logits(g, d.graph, d.features));
      });

  py::class_<ConfusionCounts>(m, "ConfusionCounts")
      .def_readonly("tp", &ConfusionCounts::tp)
      .def_readonly("tn", &ConfusionCounts::tn)
      .def_readonly("fp", &ConfusionCounts::fp)
      .def_readonly("fn", &ConfusionCounts::fn)
      .def("__repr__", [](const ConfusionCounts& c) {
        std::ostringstream s;
        s << "ConfusionCounts(tp=" << c.tp << ", tn=" << c.tn << ", fp=" << c.fp
          << ", fn=" << c.fn << ")";
        return s.str();
      });

  m.def("preset_names", &preset_names);
  m.def("generate", &generate_py, py::arg("preset"), py::arg("seed") = 0,
        py::arg("overrides") = py::dict(),
        "Generate a preset dataset; `overrides` replaces generator config keys.");
  m.def("train", &train_py, py::arg("data"), py::arg("epochs") = py::none(),
        py::arg("lr") = py::none(), py::arg("hidden") = py::none(), py::arg("seed") = py::none());
  m.def("explain", &explain_py, py::arg("model"), py::arg("data"), py::arg("method") = "beta",
        py::arg("seed") = 0, py::arg("epochs") = py::none(), py::arg("lr") = py::none(),
        py::arg("alpha") = py::none(), py::arg("beta") = py::none(), py::arg("samples") = 1);

  m.def(
      "confusion",
      [](const Dataset& d, std::vector<double> mask, double threshold, bool include_absent) {
        return confusion(EdgeMask(std::move(mask)), d.truth, threshold,
                         include_absent ? FnMode::IncludeAbsent : FnMode::GraphOnly);
      },
      py::arg("data"), py::arg("mask"), py::arg("threshold") = 0.5,
      py::arg("include_absent") = false);
  m.def("jaccard", py::overload_cast<const ConfusionCounts&>(&jaccard));
  m.def("f1", py::overload_cast<const ConfusionCounts&>(&f1));
  m.def("accuracy", py::overload_cast<const ConfusionCounts&>(&accuracy));
  m.def(
      "unfaithfulness",
      [](const GnnModel& model, const Dataset& d, std::vector<double> mask, double threshold) {
        return unfaithfulness(model, d.graph, d.features, EdgeMask(std::move(mask)), threshold);
      },
      py::arg("model"), py::arg("data"), py::arg("mask"), py::arg("threshold") = 0.5);
  m.def(
      "mann_whitney_u",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = mann_whitney_u(a, b);
        return py::make_tuple(r.u, r.p, r.bucket);
      },
      "Returns (U, two-sided p, significance bucket).");
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "Runs a CLI subcommand in-process; returns (exit_code, stdout, stderr).");
}
