#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "betamask/dataset.hpp"
#include "betamask/graph.hpp"

namespace betamask {

namespace fs = std::filesystem;

/// Malformed or inconsistent input file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to the same double.
std::string format_double(double value);

// Edge list: two integer columns `src<TAB>dst`, `#` comment lines allowed.
void write_edge_tsv(const fs::path& path, std::span<const Edge> edges,
                    const std::string& comment = {});
std::vector<Edge> read_edge_tsv(const fs::path& path);

// Dense real matrix as CSV, one row per line, no header.
void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const fs::path& path);

void write_labels_csv(const fs::path& path, std::span<const int> labels);
std::vector<int> read_labels_csv(const fs::path& path);

/// Writes graph, features, labels and truth files plus manifest.json.
/// `config` and `diagnostics` are echoed into the manifest.
void save_dataset(const fs::path& dir, const Dataset& data, const nlohmann::json& config,
                  std::uint64_t seed, const nlohmann::json& diagnostics = nullptr);

/// Loads a dataset directory written by save_dataset. `directed_truth`
/// selects the strict (no direction collapse) ground-truth mode.
Dataset load_dataset(const fs::path& dir, bool directed_truth = false);

/// Reads manifest.json from a dataset directory.
nlohmann::json load_manifest(const fs::path& dir);

/// One row of an explanation CSV.
struct MaskRow {
  std::size_t edge_index = 0;
  Edge edge;
  std::optional<double> alpha;
  std::optional<double> beta;
  double prob = 0.0;
  std::size_t rank = 0;
};

/// Header `edge_index,src,dst,alpha,beta,prob,rank`; alpha/beta left empty
/// when absent.
void write_mask_csv(const fs::path& path, std::span<const MaskRow> rows);
std::vector<MaskRow> read_mask_csv(const fs::path& path);

/// EdgeMask from mask rows, checked against the graph's edge order.
EdgeMask mask_from_rows(const Graph& graph, std::span<const MaskRow> rows);

/// 1-based ranks by descending value; ties go to the lower index.
std::vector<std::size_t> descending_ranks(std::span<const double> values);

/// Writes `text` to a sibling temp file and renames it into place.
void write_file_atomic(const fs::path& path, const std::string& text);

}  // namespace betamask
