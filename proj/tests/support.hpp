#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dytag/graph_store.hpp"
#include "dytag/metrics.hpp"
#include "dytag/synthetic.hpp"
#include "oracle.hpp"

namespace dytag::testing {

inline std::filesystem::path fixture_dir() { return DYTAG_FIXTURE_DIR; }

inline DatasetFiles toy_files() {
  const auto d = fixture_dir() / "toy";
  return {d / "edges.csv", d / "node_texts.csv", d / "edge_texts.csv", d / "labels.csv"};
}

/// Nodes 1 alice, 2 bob, 3 carol; labels 0 "A", 1 "B";
/// e1=(1,2,1,A) e2=(1,2,2,A) e3=(1,3,3,B) e4=(2,3,4,A) e5=(1,2,5,B).
inline DyTagStore toy_store() {
  TextTable nodes, texts, labels;
  nodes.insert(1, "alice");
  nodes.insert(2, "bob");
  nodes.insert(3, "carol");
  const char* t[] = {"lunch on friday", "quarterly budget review", "trading desk positions", "lunch plans next week",
                     "gas contract pricing"};
  for (TextId i = 0; i < 5; ++i) texts.insert(i, t[i]);
  labels.insert(0, "A");
  labels.insert(1, "B");
  std::vector<TemporalEdge> edges = {
      {1, 2, 1, 0, 0}, {1, 2, 2, 0, 1}, {1, 3, 3, 1, 2}, {2, 3, 4, 0, 3}, {1, 2, 5, 1, 4}};
  return DyTagStore::build(std::move(edges), std::move(nodes), std::move(texts), std::move(labels), false);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "dytag") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Writes a synthetic dataset in the canonical layout and returns its files.
inline DatasetFiles write_synthetic(const std::filesystem::path& dir, const SyntheticOptions& opts) {
  DatasetFiles f{dir / "edges.csv", dir / "node_texts.csv", dir / "edge_texts.csv", dir / "labels.csv"};
  export_dataset(generate_synthetic(opts), f);
  return f;
}


}  // namespace dytag::testing
