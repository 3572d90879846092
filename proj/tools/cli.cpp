#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "betamask/baseline_explainer.hpp"
#include "betamask/beta_explainer.hpp"
#include "betamask/checksum.hpp"
#include "betamask/datagen.hpp"
#include "betamask/gnn.hpp"
#include "betamask/io.hpp"
#include "betamask/metrics.hpp"
#include "betamask/presets.hpp"

namespace betamask::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* kMetricsHeader = "dataset,explainer,seed,jaccard,f1,accuracy,unfaithfulness";
constexpr const char* kCompareHeader = "dataset,metric,explainer_a,explainer_b,u,p,bucket";
const std::vector<std::string> kMetricNames = {"jaccard", "f1", "accuracy", "unfaithfulness"};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t default_seed() {
  const char* env = std::getenv("BETAMASK_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("BETAMASK_SEED is not an unsigned integer: ") + env);
  }
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flag values from a JSON object, inserted after the subcommand name unless
// the command line already sets the same flag.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end()) return args;
  if (std::next(it) == args.end()) throw UsageError("--config needs a file");
  const fs::path path = *std::next(it);
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config " + path.string() + " must hold a JSON object");

  std::vector<std::string> rest;
  for (auto a = args.begin(); a != args.end(); ++a) {
    if (a == it) {
      ++a;
      continue;
    }
    rest.push_back(*a);
  }
  std::vector<std::string> extra;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (std::find(rest.begin(), rest.end(), flag) != rest.end()) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back(flag);
      continue;
    }
    extra.push_back(flag);
    if (value.is_string()) {
      extra.push_back(value.get<std::string>());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      extra.push_back(joined);
    } else {
      extra.push_back(value.dump());
    }
  }
  if (rest.empty()) throw UsageError("--config given without a subcommand");
  rest.insert(rest.begin() + 1, extra.begin(), extra.end());
  return rest;
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  json inputs = json::object();
  std::vector<fs::path> outputs;
  json timings = json::object();
  json extra = json::object();

  void input(const fs::path& p) { inputs[p.string()] = sha256_file(p); }

  void write(const fs::path& path) const {
    json files = json::array();
    for (const auto& p : outputs) {
      files.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    }
    json j = {{"subcommand", subcommand}, {"args", args},
              {"cwd", fs::current_path().string()}, {"seed", seed},
              {"inputs", inputs}, {"outputs", files},
              {"timings_seconds", timings}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, j.dump(2) + "\n");
  }
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create directory " + dir.string());
}

Dataset load_data_dir(const fs::path& dir, bool directed_truth = false) {
  if (!fs::is_directory(dir)) throw UsageError("no dataset directory " + dir.string());
  if (!fs::exists(dir / "manifest.json")) throw UsageError("no manifest.json in " + dir.string());
  return load_dataset(dir, directed_truth);
}

GnnModel load_model_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw UsageError("no model file " + path.string());
  return model_from_json(read_text(path));
}

void check_compatible(const GnnModel& model, const Dataset& data) {
  const auto& c = model.config();
  if (c.task != data.task) throw UsageError("model and dataset task kinds differ");
  if (static_cast<std::size_t>(c.input_dim()) != data.feature_dim()) {
    throw UsageError("model expects " + std::to_string(c.input_dim()) + " features, data has " +
                     std::to_string(data.feature_dim()));
  }
  if (c.num_classes() != data.labels.num_classes) {
    throw UsageError("model and dataset class counts differ");
  }
}

// ---------------------------------------------------------------- generate

struct GenerateOpts {
  std::string preset_pos, preset_opt, generator_config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> genes, cells, motifs;
  std::optional<double> sparsity, corr_threshold;
};

int cmd_generate(const GenerateOpts& o, Manifest& m, std::ostream& out) {
  const auto t0 = Clock::now();
  std::string name = !o.preset_opt.empty() ? o.preset_opt : o.preset_pos;
  if (name.empty()) throw UsageError("generate needs a preset");
  DatasetPreset preset;
  try {
    preset = dataset_preset(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!o.generator_config.empty()) {
    try {
      preset.config = config_from_json(json::parse(read_text(o.generator_config)), preset.config);
    } catch (const json::exception& e) {
      throw UsageError("generator config: " + std::string(e.what()));
    }
    m.input(o.generator_config);
  }
  const std::uint64_t seed = o.seed.value_or(default_seed());
  m.seed = seed;
  std::visit(
      [&](auto& c) {
        using T = std::decay_t<decltype(c)>;
        c.seed = seed;
        if constexpr (std::is_same_v<T, ExpressionDatasetConfig>) {
          if (o.genes) c.num_genes = *o.genes;
          if (o.cells) c.cells_per_class = *o.cells;
          if (o.sparsity) c.sparsity = *o.sparsity;
          if (o.corr_threshold) c.correlation_threshold = *o.corr_threshold;
          if (o.motifs) throw UsageError("--motifs applies to motif presets only");
        } else {
          if (o.motifs) c.num_motifs = *o.motifs;
          if (o.genes || o.cells || o.sparsity || o.corr_threshold) {
            throw UsageError("--genes/--cells/--sparsity/--corr-threshold apply to expression presets");
          }
        }
        try {
          c.validate();
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      },
      preset.config);

  const Dataset data = generate(preset);
  m.timings["generate"] = seconds_since(t0);

  const auto t1 = Clock::now();
  json diagnostics = json::object();
  if (data.task == TaskKind::Graph) {
    diagnostics["probe_accuracy"] = logistic_probe_accuracy(data, seed);
  } else {
    diagnostics["cross_label_connector_fraction"] = cross_label_connector_fraction(data);
  }
  diagnostics["edges"] = data.graph.edge_count();
  diagnostics["important_edges"] = data.truth.important_count();
  diagnostics["absent_true_edges"] = data.truth.absent_true_edges.size();
  m.timings["diagnostics"] = seconds_since(t1);

  const fs::path dir = o.out;
  make_dir(dir);
  save_dataset(dir, data, config_to_json(preset.config), seed, diagnostics);
  for (const char* f : {"edges.tsv", "features.csv", "labels.csv", "truth.tsv", "absent.tsv",
                        "manifest.json"}) {
    if (fs::exists(dir / f)) m.outputs.push_back(dir / f);
  }
  m.extra["preset"] = preset.name;
  m.extra["config"] = config_to_json(preset.config);
  m.extra["diagnostics"] = diagnostics;

  out << "generated " << preset.name << ": " << data.graph.node_count() << " nodes, "
      << data.graph.edge_count() << " edges, " << data.instance_count() << " instances\n";
  for (const auto& w : data.warnings) out << "warning: " << w << "\n";
  m.write(dir / "run_manifest.json");
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::string data, out, hidden;
  std::optional<double> lr, weight_decay, train_fraction;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch;
};

int cmd_train(const TrainOpts& o, Manifest& m, std::ostream& out) {
  const Dataset data = load_data_dir(o.data);
  m.input(fs::path(o.data) / "manifest.json");

  TrainPreset preset;
  try {
    preset = train_preset(data.preset);
  } catch (const std::invalid_argument&) {
    preset.hidden = {16};
  }
  TrainConfig cfg = preset.train;
  if (o.lr) cfg.learning_rate = *o.lr;
  if (o.weight_decay) cfg.weight_decay = *o.weight_decay;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.batch) cfg.batch_size = *o.batch;
  if (o.train_fraction) cfg.train_fraction = *o.train_fraction;
  cfg.seed = o.seed.value_or(std::getenv("BETAMASK_SEED") ? default_seed() : cfg.seed);
  m.seed = cfg.seed;
  const std::vector<int> hidden =
      o.hidden.empty() ? preset.hidden : parse_int_list(o.hidden, "--hidden");
  const GnnConfig gcfg = gnn_config_for(data, hidden);
  try {
    cfg.validate();
    gcfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto t0 = Clock::now();
  const TrainResult result = train(cfg, gcfg, data);
  m.timings["train"] = seconds_since(t0);

  const fs::path path = o.out;
  if (path.has_parent_path()) make_dir(path.parent_path());
  write_file_atomic(path, model_to_json(result.model));
  m.outputs.push_back(path);

  m.extra["hyperparameters"] = {{"learning_rate", cfg.learning_rate},
                                {"weight_decay", cfg.weight_decay},
                                {"epochs", cfg.epochs},
                                {"batch_size", cfg.batch_size},
                                {"train_fraction", cfg.train_fraction},
                                {"layer_dims", gcfg.layer_dims}};
  m.extra["train_accuracy"] = result.train_accuracy;
  m.extra["test_accuracy"] = result.test_accuracy;
  out << "train_accuracy=" << format_double(result.train_accuracy)
      << " test_accuracy=" << format_double(result.test_accuracy) << "\n";
  m.write(fs::path(path.string() + ".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------- explain

struct ExplainOpts {
  std::string model, data, method = "beta", out, target = "predicted", credit = "local";
  std::optional<double> alpha, beta, lr, threshold, size_coef, entropy_coef, init_std;
  std::optional<int> epochs, samples;
  std::optional<std::size_t> batch;
  std::optional<std::uint64_t> seed;
  int seeds = 1;
  int jobs = 1;
  int khop = 1;
};

struct ExplainOutcome {
  std::vector<MaskRow> rows;
  std::vector<double> trace;
  EdgeMask mask;
};

std::string dot_edge(const Edge& e, const char* color, double scaled, bool dashed) {
  std::ostringstream s;
  s << "  " << e.src << " -> " << e.dst << " [color=" << color
    << ", penwidth=" << format_double(1.0 + 4.0 * scaled);
  if (dashed) s << ", style=dashed";
  s << "];\n";
  return s.str();
}

// Evaluation subgraph: best k-hop neighborhood for node tasks, the whole
// graph for graph tasks. TP blue, FP red, FN pink; absent true edges dashed.
std::string explanation_dot(const Dataset& data, const EdgeMask& mask, double threshold,
                            int khop) {
  const Graph& g = data.graph;
  std::vector<std::size_t> edges;
  std::vector<NodeId> nodes;
  std::string title = "explanation";
  if (data.task == TaskKind::Node && khop > 0) {
    const auto eval = best_khop_subgraph_eval(data, mask, khop, threshold);
    const NodeId center = eval.best_score().node;
    const auto sub = khop_subgraph(g, center, khop);
    edges = sub.edge_index;
    nodes = sub.nodes;
    title = "node_" + std::to_string(center);
  } else {
    edges.resize(g.edge_count());
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = i;
    nodes.resize(g.node_count());
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<NodeId>(i);
  }

  std::vector<double> probs(g.edge_count());
  std::vector<bool> accepted(g.edge_count());
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    probs[i] = mask[i];
    accepted[i] = mask[i] >= threshold;
  }
  // Nothing accepted: draw every edge at the base width.
  const bool any = std::find(accepted.begin(), accepted.end(), true) != accepted.end();
  const auto scaled = any ? scale_probs_for_display(probs, accepted)
                          : std::vector<double>(g.edge_count(), 0.0);

  std::string body;
  for (NodeId v : nodes) body += "  " + std::to_string(v) + ";\n";
  for (std::size_t i : edges) {
    const bool truth = data.truth.important[i] != 0;
    if (accepted[i] && truth) {
      body += dot_edge(g.edge(i), "blue", scaled[i], false);
    } else if (accepted[i]) {
      body += dot_edge(g.edge(i), "red", scaled[i], false);
    } else if (truth) {
      body += dot_edge(g.edge(i), "pink", 0.0, false);
    }
  }
  for (const Edge& e : data.truth.absent_true_edges) {
    if (std::binary_search(nodes.begin(), nodes.end(), e.src) &&
        std::binary_search(nodes.begin(), nodes.end(), e.dst)) {
      body += dot_edge(e, "pink", 0.0, true);
    }
  }
  return "digraph " + title + " {\n" + body + "}\n";
}

std::string ecdf_csv(const Dataset& data, std::span<const double> probs) {
  std::vector<double> tp, fp;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    (data.truth.important[i] ? tp : fp).push_back(probs[i]);
  }
  std::string text = "value,cum_frac,group\n";
  for (const auto& [values, group] :
       {std::pair{&tp, "true_positive"}, std::pair{&fp, "false_positive"}}) {
    for (const auto& [v, c] : ecdf(*values)) {
      text += format_double(v) + "," + format_double(c) + "," + group + "\n";
    }
  }
  return text;
}

ExplainOutcome run_explainer(const ExplainOpts& o, const GnnModel& model, const Dataset& data,
                             const ExplainPreset& preset, std::uint64_t seed) {
  const ExplanationTarget target =
      o.target == "label" ? ExplanationTarget::TrueLabel : ExplanationTarget::Predicted;
  ExplainOutcome result;
  const Graph& g = data.graph;
  if (o.method == "beta") {
    ExplainerConfig c = preset.beta;
    if (o.alpha) c.prior_alpha = *o.alpha;
    if (o.beta) c.prior_beta = *o.beta;
    if (o.lr) c.learning_rate = *o.lr;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.samples) c.samples_per_step = *o.samples;
    if (o.batch) c.graph_batch_size = *o.batch;
    if (o.threshold) c.threshold = *o.threshold;
    c.target = target;
    c.credit = o.credit == "global" ? CreditAssignment::Global : CreditAssignment::Local;
    c.seed = seed;
    const auto r = fit(c, model, g, data.features, &data.labels);
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
      result.rows.push_back({i, g.edge(i), r.alpha[i], r.beta[i], r.prob[i], r.rank[i]});
    }
    result.trace = r.elbo_trace;
    result.mask = r.mask;
  } else if (o.method == "gnnx") {
    BaselineConfig c = preset.baseline;
    if (o.lr) c.learning_rate = *o.lr;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.batch) c.graph_batch_size = *o.batch;
    if (o.size_coef) c.size_coefficient = *o.size_coef;
    if (o.entropy_coef) c.entropy_coefficient = *o.entropy_coef;
    if (o.init_std) c.init_std = *o.init_std;
    c.target = target;
    c.seed = seed;
    const auto r = fit_baseline(c, model, g, data.features, &data.labels);
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
      result.rows.push_back({i, g.edge(i), std::nullopt, std::nullopt, r.prob[i], r.rank[i]});
    }
    result.trace = r.loss_trace;
    result.mask = r.mask;
  } else {
    result.mask = random_mask_baseline(g, seed);
    const auto rank = descending_ranks(result.mask.weights());
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
      result.rows.push_back({i, g.edge(i), std::nullopt, std::nullopt, result.mask[i], rank[i]});
    }
  }
  return result;
}

int cmd_explain(const ExplainOpts& o, Manifest& m, std::ostream& out) {
  if (o.method != "beta" && o.method != "gnnx" && o.method != "random") {
    throw UsageError("unknown method '" + o.method + "' (beta, gnnx, random)");
  }
  if (o.target != "predicted" && o.target != "label") {
    throw UsageError("--target must be predicted or label");
  }
  if (o.credit != "local" && o.credit != "global") {
    throw UsageError("--credit must be local or global");
  }
  if (o.seeds < 1 || o.jobs < 1) throw UsageError("--seeds and --jobs must be positive");
  const Dataset data = load_data_dir(o.data);
  const GnnModel model = load_model_file(o.model);
  check_compatible(model, data);
  const fs::path data_manifest = fs::path(o.data) / "manifest.json";
  m.input(data_manifest);
  m.input(o.model);

  ExplainPreset preset;
  try {
    preset = explain_preset(data.preset);
  } catch (const std::invalid_argument&) {
  }
  const double threshold = o.threshold.value_or(0.5);
  const std::uint64_t base_seed = o.seed.value_or(default_seed());
  m.seed = base_seed;

  const fs::path root = o.out;
  make_dir(root);
  std::vector<std::uint64_t> seeds;
  std::vector<fs::path> dirs;
  for (int k = 0; k < o.seeds; ++k) {
    seeds.push_back(base_seed + static_cast<std::uint64_t>(k));
    dirs.push_back(o.seeds == 1 ? root : root / ("seed-" + std::to_string(seeds.back())));
    make_dir(dirs.back());
  }

  const std::string data_sha = sha256_file(data_manifest);
  const std::string model_sha = sha256_file(o.model);
  std::vector<std::vector<fs::path>> written(seeds.size());
  std::vector<double> timing(seeds.size());
  std::vector<std::string> errors(seeds.size());

  auto work = [&](std::size_t k) {
    try {
      const auto t0 = Clock::now();
      const auto r = run_explainer(o, model, data, preset, seeds[k]);
      timing[k] = seconds_since(t0);
      const fs::path& d = dirs[k];
      write_mask_csv(d / "mask.csv", r.rows);
      written[k].push_back(d / "mask.csv");
      if (o.method != "random") {
        std::string trace = o.method == "beta" ? "epoch,elbo\n" : "epoch,loss\n";
        for (std::size_t i = 0; i < r.trace.size(); ++i) {
          trace += std::to_string(i + 1) + "," + format_double(r.trace[i]) + "\n";
        }
        write_file_atomic(d / "trace.csv", trace);
        written[k].push_back(d / "trace.csv");
      }
      write_file_atomic(d / "ecdf.csv", ecdf_csv(data, r.mask.weights()));
      written[k].push_back(d / "ecdf.csv");
      write_file_atomic(d / "explanation.dot", explanation_dot(data, r.mask, threshold, o.khop));
      written[k].push_back(d / "explanation.dot");
      const json meta = {{"method", o.method},       {"seed", seeds[k]},
                         {"dataset", data.preset},   {"threshold", threshold},
                         {"data_sha256", data_sha},  {"model_sha256", model_sha}};
      write_file_atomic(d / "mask.meta.json", meta.dump(2) + "\n");
      written[k].push_back(d / "mask.meta.json");
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  };

  const std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(o.jobs), seeds.size());
  if (jobs <= 1) {
    for (std::size_t k = 0; k < seeds.size(); ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    std::mutex lock;
    std::size_t next = 0;
    for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t k;
          {
            std::lock_guard<std::mutex> guard(lock);
            if (next >= seeds.size()) return;
            k = next++;
          }
          work(k);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t k = 0; k < seeds.size(); ++k) {
    if (!errors[k].empty()) throw std::runtime_error("seed " + std::to_string(seeds[k]) + ": " +
                                                     errors[k]);
    m.timings["explain_seed_" + std::to_string(seeds[k])] = timing[k];
    for (const auto& p : written[k]) m.outputs.push_back(p);
    out << o.method << " seed " << seeds[k] << " -> " << dirs[k].string() << "\n";
  }
  m.extra["method"] = o.method;
  m.write(root / "run_manifest.json");
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOpts {
  std::string mask, data, model, fn_mode = "graph-only", out, explainer, manifest;
  double threshold = 0.5;
  int khop = 1;
  bool directed_truth = false;
  std::optional<std::uint64_t> seed;
};

int cmd_evaluate(const EvaluateOpts& o, Manifest& m, std::ostream& out) {
  FnMode mode;
  try {
    mode = fn_mode_from_string(o.fn_mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.khop < 0) throw UsageError("--khop must be >= 0");
  const Dataset data = load_data_dir(o.data, o.directed_truth);
  const GnnModel model = load_model_file(o.model);
  check_compatible(model, data);
  if (!fs::is_regular_file(o.mask)) throw UsageError("no mask file " + o.mask);
  const fs::path data_manifest = fs::path(o.data) / "manifest.json";
  m.input(data_manifest);
  m.input(o.model);
  m.input(o.mask);

  json meta = json::object();
  const fs::path meta_path = fs::path(o.mask).parent_path() / "mask.meta.json";
  if (fs::exists(meta_path)) {
    meta = json::parse(read_text(meta_path));
    if (meta.contains("data_sha256") &&
        meta.at("data_sha256").get<std::string>() != sha256_file(data_manifest)) {
      throw std::runtime_error("mask was produced from a different dataset (checksum mismatch)");
    }
    if (meta.contains("model_sha256") &&
        meta.at("model_sha256").get<std::string>() != sha256_file(o.model)) {
      throw std::runtime_error("mask was produced from a different model (checksum mismatch)");
    }
  }

  const auto t0 = Clock::now();
  const EdgeMask mask = mask_from_rows(data.graph, read_mask_csv(o.mask));
  ConfusionCounts counts;
  if (data.task == TaskKind::Node && o.khop > 0) {
    counts = best_khop_subgraph_eval(data, mask, o.khop, o.threshold, mode).best_score().counts;
  } else {
    counts = confusion(mask, data.truth, o.threshold, mode);
  }
  const double unf = unfaithfulness(model, data.graph, data.features, mask, o.threshold);
  m.timings["evaluate"] = seconds_since(t0);

  const std::string explainer =
      !o.explainer.empty() ? o.explainer : meta.value("method", std::string("unknown"));
  const std::uint64_t seed = o.seed ? *o.seed : meta.value("seed", std::uint64_t{0});
  m.seed = seed;
  const std::string row = data.preset + "," + explainer + "," + std::to_string(seed) + "," +
                          format_double(jaccard(counts)) + "," + format_double(f1(counts)) +
                          "," + format_double(accuracy(counts)) + "," + format_double(unf);

  const fs::path path = o.out;
  if (path.has_parent_path()) make_dir(path.parent_path());
  std::string text = fs::exists(path) ? read_text(path) : std::string(kMetricsHeader) + "\n";
  if (text.rfind(kMetricsHeader, 0) != 0) {
    throw UsageError(path.string() + " is not a metrics report");
  }
  text += row + "\n";
  write_file_atomic(path, text);
  m.outputs.push_back(path);
  m.extra["row"] = row;
  out << row << "\n";

  const fs::path manifest_path =
      !o.manifest.empty() ? fs::path(o.manifest)
                          : fs::path(o.mask).parent_path() / "evaluate.manifest.json";
  m.write(manifest_path);
  return 0;
}

// ---------------------------------------------------------------- compare

struct CompareOpts {
  std::vector<std::string> reports, pairs, metrics;
  std::string out;
};

struct MetricRow {
  std::string dataset, explainer;
  std::map<std::string, double> values;
};

std::vector<MetricRow> read_metrics(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw UsageError("no report " + path.string());
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw UsageError(path.string() + " lacks the metrics header");
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw ParseError(path.string() + ": bad row '" + line + "'");
    MetricRow r{cells[0], cells[1], {}};
    for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
      r.values[kMetricNames[i]] = std::stod(cells[3 + i]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

int cmd_compare(const CompareOpts& o, Manifest& m, std::ostream& out) {
  std::vector<MetricRow> rows;
  for (const auto& r : o.reports) {
    auto part = read_metrics(r);
    rows.insert(rows.end(), part.begin(), part.end());
    m.input(r);
  }
  std::vector<std::string> metrics;
  for (const auto& item : o.metrics) {
    std::stringstream ss(item);
    std::string name;
    while (std::getline(ss, name, ',')) metrics.push_back(name);
  }
  if (metrics.empty()) metrics = kMetricNames;
  for (const auto& name : metrics) {
    if (std::find(kMetricNames.begin(), kMetricNames.end(), name) == kMetricNames.end()) {
      throw UsageError("unknown metric '" + name + "'");
    }
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& item : o.pairs) {
    std::stringstream ss(item);
    std::string pair;
    while (std::getline(ss, pair, ',')) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == pair.size()) {
        throw UsageError("pair '" + pair + "' is not of the form a:b");
      }
      pairs.emplace_back(pair.substr(0, colon), pair.substr(colon + 1));
    }
  }
  if (pairs.empty()) throw UsageError("compare needs --pairs");

  std::vector<std::string> datasets;
  for (const auto& r : rows) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) {
      datasets.push_back(r.dataset);
    }
  }
  auto samples = [&](const std::string& ds, const std::string& ex, const std::string& metric) {
    std::vector<double> v;
    for (const auto& r : rows) {
      if (r.dataset == ds && r.explainer == ex) v.push_back(r.values.at(metric));
    }
    return v;
  };

  std::string text = std::string(kCompareHeader) + "\n";
  for (const auto& ds : datasets) {
    for (const auto& metric : metrics) {
      for (const auto& [a, b] : pairs) {
        const auto va = samples(ds, a, metric);
        const auto vb = samples(ds, b, metric);
        if (va.empty() || vb.empty()) {
          throw UsageError("no '" + (va.empty() ? a : b) + "' rows for dataset " + ds);
        }
        const auto s = mann_whitney_u(va, vb);
        text += ds + "," + metric + "," + a + "," + b + "," + format_double(s.u) + "," +
                format_double(s.p) + "," + s.bucket + "\n";
      }
    }
  }
  if (datasets.empty()) throw UsageError("reports hold no rows");

  const fs::path path = o.out;
  if (path.has_parent_path()) make_dir(path.parent_path());
  write_file_atomic(path, text);
  m.outputs.push_back(path);
  out << text;
  m.write(fs::path(path.string() + ".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------- replay

int cmd_replay(const std::vector<std::string>& manifests, std::ostream& out, std::ostream& err) {
  for (const auto& path : manifests) {
    json j;
    try {
      j = json::parse(read_text(path));
    } catch (const json::exception& e) {
      throw UsageError(path + ": " + e.what());
    }
    if (!j.contains("args")) throw UsageError(path + " has no recorded args");
    const auto args = j.at("args").get<std::vector<std::string>>();
    const fs::path here = fs::current_path();
    const fs::path cwd = j.value("cwd", here.string());
    fs::current_path(cwd);
    const int code = run_cli(args, out, err);
    fs::current_path(here);
    if (code != 0) return code;
  }
  return 0;
}

int dispatch(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
  const std::vector<std::string> args = expand_config(raw);

  CLI::App app{"Edge-mask explanations for graph neural networks", "betamask"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Generate a benchmark dataset");
  g->add_option("name", gen.preset_pos, "Preset name");
  g->add_option("--preset", gen.preset_opt, "Preset name");
  g->add_option("--generator-config", gen.generator_config, "JSON overlay on the preset config");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--seed", gen.seed);
  g->add_option("--genes", gen.genes);
  g->add_option("--cells", gen.cells, "Cells per class");
  g->add_option("--sparsity", gen.sparsity);
  g->add_option("--corr-threshold", gen.corr_threshold);
  g->add_option("--motifs", gen.motifs);
  g->add_option("--config", "Flags as a JSON object");

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Train a GNN on a dataset");
  t->add_option("--data", tr.data)->required();
  t->add_option("--out", tr.out, "Model JSON path")->required();
  t->add_option("--lr", tr.lr);
  t->add_option("--weight-decay", tr.weight_decay);
  t->add_option("--epochs", tr.epochs);
  t->add_option("--seed", tr.seed);
  t->add_option("--hidden", tr.hidden, "Hidden widths, e.g. 16,16");
  t->add_option("--batch", tr.batch);
  t->add_option("--train-fraction", tr.train_fraction);
  t->add_option("--config", "Flags as a JSON object");

  ExplainOpts ex;
  auto* e = app.add_subcommand("explain", "Fit an edge mask for a trained model");
  e->add_option("--model", ex.model)->required();
  e->add_option("--data", ex.data)->required();
  e->add_option("--out", ex.out, "Output directory")->required();
  e->add_option("--method", ex.method, "beta, gnnx or random");
  e->add_option("--alpha", ex.alpha);
  e->add_option("--beta", ex.beta);
  e->add_option("--lr", ex.lr);
  e->add_option("--epochs", ex.epochs);
  e->add_option("--batch", ex.batch);
  e->add_option("--samples", ex.samples, "Mask draws per step");
  e->add_option("--seed", ex.seed);
  e->add_option("--seeds", ex.seeds, "Number of consecutive seeds");
  e->add_option("--jobs", ex.jobs);
  e->add_option("--threshold", ex.threshold);
  e->add_option("--khop", ex.khop, "Neighborhood size of the DOT subgraph (0 = whole graph)");
  e->add_option("--target", ex.target, "predicted or label");
  e->add_option("--credit", ex.credit, "local or global");
  e->add_option("--size-coef", ex.size_coef);
  e->add_option("--entropy-coef", ex.entropy_coef);
  e->add_option("--init-std", ex.init_std);
  e->add_option("--config", "Flags as a JSON object");

  EvaluateOpts ev;
  auto* v = app.add_subcommand("evaluate", "Score a mask against the ground truth");
  v->add_option("--mask", ev.mask)->required();
  v->add_option("--data", ev.data)->required();
  v->add_option("--model", ev.model)->required();
  v->add_option("--out", ev.out, "Metrics CSV to append to")->required();
  v->add_option("--fn-mode", ev.fn_mode, "graph-only or include-absent");
  v->add_option("--threshold", ev.threshold);
  v->add_option("--khop", ev.khop, "Best k-hop subgraph (0 = whole graph)");
  v->add_flag("--directed-truth", ev.directed_truth);
  v->add_option("--explainer", ev.explainer, "Name in the report (default: from mask metadata)");
  v->add_option("--seed", ev.seed);
  v->add_option("--manifest", ev.manifest);
  v->add_option("--config", "Flags as a JSON object");

  CompareOpts cmp;
  auto* c = app.add_subcommand("compare", "Mann-Whitney tests between explainers");
  c->add_option("--reports", cmp.reports)->required();
  c->add_option("--pairs", cmp.pairs, "a:b[,c:d]")->required();
  c->add_option("--metric", cmp.metrics);
  c->add_option("--out", cmp.out)->required();
  c->add_option("--config", "Flags as a JSON object");

  std::vector<std::string> manifests;
  auto* r = app.add_subcommand("replay", "Re-run commands recorded in run manifests");
  r->add_option("manifests", manifests)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& h) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& h) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << "\n";
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  Manifest m;
  m.args = args;
  if (g->parsed()) return m.subcommand = "generate", cmd_generate(gen, m, out);
  if (t->parsed()) return m.subcommand = "train", cmd_train(tr, m, out);
  if (e->parsed()) return m.subcommand = "explain", cmd_explain(ex, m, out);
  if (v->parsed()) return m.subcommand = "evaluate", cmd_evaluate(ev, m, out);
  if (c->parsed()) return m.subcommand = "compare", cmd_compare(cmp, m, out);
  return cmd_replay(manifests, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace betamask::cli
