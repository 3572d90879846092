#include "betamask/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "betamask/checksum.hpp"

namespace betamask {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const fs::path& path, std::size_t line) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": bad number '" + text + "'");
  }
  return value;
}

long long parse_int(const std::string& text, const fs::path& path, std::size_t line) {
  long long value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": bad integer '" + text +
                     "'");
  }
  return value;
}

NodeId parse_node(const std::string& text, const fs::path& path, std::size_t line) {
  const long long v = parse_int(text, path, line);
  if (v < 0 || v > static_cast<long long>(std::numeric_limits<NodeId>::max())) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": node index out of range");
  }
  return static_cast<NodeId>(v);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_edge_tsv(const fs::path& path, std::span<const Edge> edges,
                    const std::string& comment) {
  auto out = open_out(path);
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const auto& e : edges) out << e.src << '\t' << e.dst << '\n';
}

std::vector<Edge> read_edge_tsv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ss(t);
    std::string a, b, extra;
    if (!(ss >> a >> b) || (ss >> extra)) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected two integer columns");
    }
    edges.push_back({parse_node(a, path, lineno), parse_node(b, path, lineno)});
  }
  return edges;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) row.push_back(parse_double(cell, path, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  const Eigen::Index cols = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][c];
  }
  return m;
}

void write_labels_csv(const fs::path& path, std::span<const int> labels) {
  auto out = open_out(path);
  for (int l : labels) out << l << '\n';
}

std::vector<int> read_labels_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    labels.push_back(static_cast<int>(parse_int(t, path, lineno)));
  }
  return labels;
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

void save_dataset(const fs::path& dir, const Dataset& data, const nlohmann::json& config,
                  std::uint64_t seed, const nlohmann::json& diagnostics) {
  data.validate();
  fs::create_directories(dir);

  write_edge_tsv(dir / "edges.tsv", data.graph.edges(), "src\tdst");

  // Node rows; graph-task instances are laid out as consecutive column blocks.
  const auto n = static_cast<Eigen::Index>(data.graph.node_count());
  const auto d = static_cast<Eigen::Index>(data.feature_dim());
  Eigen::MatrixXd flat(n, d * static_cast<Eigen::Index>(data.features.size()));
  for (std::size_t g = 0; g < data.features.size(); ++g) {
    flat.middleCols(static_cast<Eigen::Index>(g) * d, d) = data.features[g];
  }
  write_matrix_csv(dir / "features.csv", flat);
  write_labels_csv(dir / "labels.csv", data.labels.values);

  std::vector<Edge> present, absent;
  for (const auto& e : data.true_edges) {
    (data.graph.contains(e.src, e.dst) ? present : absent).push_back(e);
  }
  write_edge_tsv(dir / "truth.tsv", present, "true edges present in the graph");
  write_edge_tsv(dir / "absent.tsv", absent, "true edges absent from the graph");

  nlohmann::json files = nlohmann::json::object();
  for (const char* name : {"edges.tsv", "features.csv", "labels.csv", "truth.tsv", "absent.tsv"}) {
    files[name] = sha256_file(dir / name);
  }
  nlohmann::json manifest = {
      {"preset", data.preset},
      {"task_kind", to_string(data.task)},
      {"node_count", data.graph.node_count()},
      {"feature_dim", data.feature_dim()},
      {"num_graphs", data.task == TaskKind::Graph ? data.features.size() : 1},
      {"num_classes", data.labels.num_classes},
      {"seed", seed},
      {"config", config},
      {"files", files},
      {"warnings", data.warnings},
  };
  if (!diagnostics.is_null()) manifest["diagnostics"] = diagnostics;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

nlohmann::json load_manifest(const fs::path& dir) {
  auto in = open_in(dir / "manifest.json");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
}

Dataset load_dataset(const fs::path& dir, bool directed_truth) {
  const auto manifest = load_manifest(dir);
  if (manifest.contains("files")) {
    for (const auto& [name, sha] : manifest.at("files").items()) {
      if (!fs::exists(dir / name)) throw ParseError((dir / name).string() + " is missing");
      if (sha256_file(dir / name) != sha.get<std::string>()) {
        throw ParseError((dir / name).string() + ": checksum mismatch with manifest.json");
      }
    }
  }
  Dataset data;
  try {
    data.preset = manifest.at("preset").get<std::string>();
    data.task = task_kind_from_string(manifest.at("task_kind").get<std::string>());
    data.labels.num_classes = manifest.at("num_classes").get<int>();
    const auto n = manifest.at("node_count").get<std::size_t>();
    const auto d = manifest.at("feature_dim").get<Eigen::Index>();
    const auto graphs = manifest.at("num_graphs").get<Eigen::Index>();

    data.graph = Graph::build(read_edge_tsv(dir / "edges.tsv"), n);
    const auto flat = read_matrix_csv(dir / "features.csv");
    if (flat.rows() != static_cast<Eigen::Index>(n) || flat.cols() != d * graphs) {
      throw ParseError("features.csv shape does not match manifest");
    }
    for (Eigen::Index g = 0; g < graphs; ++g) data.features.push_back(flat.middleCols(g * d, d));
    data.labels.values = read_labels_csv(dir / "labels.csv");
    data.labels.task = data.task;

    data.true_edges = read_edge_tsv(dir / "truth.tsv");
    if (fs::exists(dir / "absent.tsv")) {
      auto absent = read_edge_tsv(dir / "absent.tsv");
      data.true_edges.insert(data.true_edges.end(), absent.begin(), absent.end());
    }
    data.truth = make_ground_truth(data.graph, data.true_edges, directed_truth);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw ParseError(dir.string() + ": " + e.what());
  }
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(dir.string() + ": " + e.what());
  }
  return data;
}

std::vector<std::size_t> descending_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<std::size_t> rank(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  return rank;
}

void write_mask_csv(const fs::path& path, std::span<const MaskRow> rows) {
  auto out = open_out(path);
  out << "edge_index,src,dst,alpha,beta,prob,rank\n";
  for (const auto& r : rows) {
    out << r.edge_index << ',' << r.edge.src << ',' << r.edge.dst << ',';
    if (r.alpha) out << format_double(*r.alpha);
    out << ',';
    if (r.beta) out << format_double(*r.beta);
    out << ',' << format_double(r.prob) << ',' << r.rank << '\n';
  }
}

std::vector<MaskRow> read_mask_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "edge_index,src,dst,alpha,beta,prob,rank") {
    throw ParseError(path.string() + ": missing or unexpected header");
  }
  std::vector<MaskRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 7) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 7 columns");
    }
    MaskRow r;
    r.edge_index = static_cast<std::size_t>(parse_int(cells[0], path, lineno));
    r.edge = {parse_node(cells[1], path, lineno), parse_node(cells[2], path, lineno)};
    if (!cells[3].empty()) r.alpha = parse_double(cells[3], path, lineno);
    if (!cells[4].empty()) r.beta = parse_double(cells[4], path, lineno);
    r.prob = parse_double(cells[5], path, lineno);
    r.rank = static_cast<std::size_t>(parse_int(cells[6], path, lineno));
    rows.push_back(r);
  }
  return rows;
}

EdgeMask mask_from_rows(const Graph& graph, std::span<const MaskRow> rows) {
  if (rows.size() != graph.edge_count()) {
    throw std::invalid_argument("mask has " + std::to_string(rows.size()) + " rows but graph has " +
                                std::to_string(graph.edge_count()) + " edges");
  }
  std::vector<double> weights(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.edge_index != i || r.edge != graph.edge(i)) {
      throw std::invalid_argument("mask row " + std::to_string(i) +
                                  " does not match the graph's edge order");
    }
    weights[i] = r.prob;
  }
  return EdgeMask(std::move(weights));
}

}  // namespace betamask
