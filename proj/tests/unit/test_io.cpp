#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "betamask/checksum.hpp"
#include "betamask/io.hpp"
#include "betamask/presets.hpp"

using namespace betamask;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("betamask_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = n(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("edge TSV accepts comments and rejects junk") {
  const auto dir = scratch("tsv");
  write(dir / "e.tsv", "# src\tdst\n0\t1\n\n2\t0\n");
  CHECK(read_edge_tsv(dir / "e.tsv") == std::vector<Edge>{{0, 1}, {2, 0}});
  write(dir / "bad.tsv", "0\tx\n");
  CHECK_THROWS_AS(read_edge_tsv(dir / "bad.tsv"), ParseError);
  write(dir / "neg.tsv", "0\t-3\n");
  CHECK_THROWS_AS(read_edge_tsv(dir / "neg.tsv"), ParseError);
  CHECK_THROWS_AS(read_edge_tsv(dir / "missing.tsv"), ParseError);
}

TEST_CASE("matrix and labels round-trip exactly") {
  const auto dir = scratch("mat");
  Eigen::MatrixXd m = Eigen::MatrixXd::Random(7, 3) * 1e-3;
  write_matrix_csv(dir / "m.csv", m);
  CHECK(read_matrix_csv(dir / "m.csv") == m);
  write(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(read_matrix_csv(dir / "ragged.csv"), ParseError);
  const std::vector<int> labels{0, 1, 1, 0};
  write_labels_csv(dir / "l.csv", labels);
  CHECK(read_labels_csv(dir / "l.csv") == labels);
}

TEST_CASE("mask CSV round-trip with and without shapes") {
  const auto dir = scratch("mask");
  const Graph g = Graph::build(std::vector<Edge>{{0, 1}, {1, 2}}, 3);
  std::vector<MaskRow> rows{{0, {0, 1}, 0.8, 0.6, 0.8 / 1.4, 1}, {1, {1, 2}, {}, {}, 0.25, 2}};
  write_mask_csv(dir / "mask.csv", rows);
  std::ifstream in(dir / "mask.csv");
  std::string header, second, third;
  std::getline(in, header);
  std::getline(in, second);
  std::getline(in, third);
  CHECK(header == "edge_index,src,dst,alpha,beta,prob,rank");
  CHECK(third == "1,1,2,,,0.25,2");
  const auto back = read_mask_csv(dir / "mask.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].alpha == 0.8);
  CHECK_FALSE(back[1].beta.has_value());
  const EdgeMask m = mask_from_rows(g, back);
  CHECK(m[1] == 0.25);
  const Graph other = Graph::build(std::vector<Edge>{{0, 1}, {2, 1}}, 3);
  CHECK_THROWS_AS(mask_from_rows(other, back), std::invalid_argument);
}

TEST_CASE("descending ranks break ties by index") {
  const std::vector<double> v{0.2, 0.9, 0.2, 0.5};
  CHECK(descending_ranks(v) == std::vector<std::size_t>{3, 1, 4, 2});
}

TEST_CASE("dataset directory round-trip and tamper detection") {
  auto preset = dataset_preset("sg-base");
  std::get<MotifDatasetConfig>(preset.config).num_motifs = 6;
  const Dataset d = generate(preset);
  const auto dir = scratch("data");
  save_dataset(dir, d, config_to_json(preset.config), 0);
  const Dataset back = load_dataset(dir);
  CHECK(back.graph == d.graph);
  CHECK(back.labels.values == d.labels.values);
  CHECK(back.features.front() == d.features.front());
  CHECK(back.truth.important == d.truth.important);
  CHECK(back.preset == "sg-base");

  // Saving twice gives identical bytes.
  const auto dir2 = scratch("data2");
  save_dataset(dir2, d, config_to_json(preset.config), 0);
  for (const char* f : {"edges.tsv", "features.csv", "labels.csv", "truth.tsv", "manifest.json"}) {
    CHECK(sha256_file(dir / f) == sha256_file(dir2 / f));
  }

  std::ofstream(dir / "labels.csv", std::ios::app) << "1\n";
  CHECK_THROWS_AS(load_dataset(dir), ParseError);
}

TEST_CASE("graph-task datasets keep one feature block per instance") {
  auto preset = dataset_preset("expr-50");
  auto& c = std::get<ExpressionDatasetConfig>(preset.config);
  c.num_genes = 8;
  c.cells_per_class = 5;
  const Dataset d = generate(preset);
  const auto dir = scratch("expr");
  save_dataset(dir, d, config_to_json(preset.config), 0);
  const Dataset back = load_dataset(dir);
  REQUIRE(back.features.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(back.features[i] == d.features[i]);
  CHECK(back.truth.absent_true_edges == d.truth.absent_true_edges);
}

TEST_CASE("write_file_atomic replaces content") {
  const auto dir = scratch("atomic");
  write_file_atomic(dir / "x.txt", "one");
  write_file_atomic(dir / "x.txt", "two");
  std::ifstream in(dir / "x.txt");
  std::string s;
  in >> s;
  CHECK(s == "two");
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 1);
}
