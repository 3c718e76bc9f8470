#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dytag/types.hpp"

namespace dytag {

struct TemporalEdge {
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp ts = 0;
  LabelId label = 0;
  std::optional<TextId> text_id;

  friend bool operator==(const TemporalEdge&, const TemporalEdge&) = default;
};

/// Dense id -> text table. Ids need not be contiguous; absent ids are
/// distinguished from registered empty strings.
class TextTable {
 public:
  /// Returns false if the id was already registered.
  bool insert(std::uint32_t id, std::string text);
  bool contains(std::uint32_t id) const noexcept {
    return id < present_.size() && present_[id];
  }
  const std::string& at(std::uint32_t id) const;
  std::size_t size() const noexcept { return count_; }
  /// One past the largest registered id.
  std::uint32_t bound() const noexcept { return static_cast<std::uint32_t>(present_.size()); }
  std::vector<std::uint32_t> ids() const;

  friend bool operator==(const TextTable&, const TextTable&) = default;

 private:
  std::vector<std::string> texts_;
  std::vector<bool> present_;
  std::size_t count_ = 0;
};

struct DatasetFiles {
  std::filesystem::path edges;
  std::filesystem::path node_texts;
  std::filesystem::path edge_texts;
  std::filesystem::path labels;
};

/// Immutable, chronologically ordered DyTAG with per-node incidence indexes.
class DyTagStore {
 public:
  DyTagStore() = default;

  /// Validates references, stably sorts by timestamp and builds indexes.
  /// Throws IngestError on dangling references or an empty edge list.
  static DyTagStore build(std::vector<TemporalEdge> edges, TextTable node_texts,
                          TextTable edge_texts, TextTable labels, bool bipartite);

  std::span<const TemporalEdge> edges() const noexcept { return edges_; }
  const TemporalEdge& edge(EdgeIndex i) const { return edges_.at(i); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t num_nodes() const noexcept { return node_texts_.size(); }
  std::size_t num_labels() const noexcept { return labels_.size(); }
  bool bipartite() const noexcept { return bipartite_; }

  const TextTable& node_texts() const noexcept { return node_texts_; }
  const TextTable& edge_texts() const noexcept { return edge_texts_; }
  const TextTable& labels() const noexcept { return labels_; }

  bool has_node(NodeId n) const noexcept { return node_texts_.contains(n); }
  /// Empty for unknown nodes.
  std::string_view node_text(NodeId n) const;
  /// Empty when the edge carries no text.
  std::string_view edge_text(const TemporalEdge& e) const;
  std::string_view label_text(LabelId l) const;
  /// Case-insensitive exact match after trimming.
  std::optional<LabelId> find_label(std::string_view text) const;
  std::vector<LabelId> label_ids() const { return labels_.ids(); }

  /// Edge indices where the node is source / destination, in stored order.
  std::span<const EdgeIndex> out_edges(NodeId n) const;
  std::span<const EdgeIndex> in_edges(NodeId n) const;
  /// Number of leading entries of `incidence` whose timestamp is < t.
  std::size_t count_before(std::span<const EdgeIndex> incidence, Timestamp t) const;
  /// Number of stored edges with timestamp < t.
  std::size_t edges_before(Timestamp t) const;

  /// Registered node ids, ascending.
  std::vector<NodeId> node_ids() const { return node_texts_.ids(); }
  /// Distinct destination nodes of the edge stream, ascending.
  std::vector<NodeId> destination_nodes() const;

  /// Most frequent label over edges [0, end), ties by earliest occurrence.
  std::optional<LabelId> modal_label(std::size_t end) const;

 private:
  std::vector<TemporalEdge> edges_;
  TextTable node_texts_;
  TextTable edge_texts_;
  TextTable labels_;
  bool bipartite_ = false;
  std::vector<std::size_t> out_offsets_;
  std::vector<EdgeIndex> out_index_;
  std::vector<std::size_t> in_offsets_;
  std::vector<EdgeIndex> in_index_;
};

/// Chronological train/validation/test partition of a store.
struct SplitView {
  const DyTagStore* store = nullptr;
  std::size_t train_end = 0;
  std::size_t valid_end = 0;

  std::span<const TemporalEdge> train() const { return store->edges().subspan(0, train_end); }
  std::span<const TemporalEdge> valid() const {
    return store->edges().subspan(train_end, valid_end - train_end);
  }
  std::span<const TemporalEdge> test() const { return store->edges().subspan(valid_end); }
  std::size_t test_size() const { return store->num_edges() - valid_end; }
};

/// Consecutive block of test edges [begin, end) in absolute edge indices.
struct EvalBatch {
  std::size_t index = 0;
  EdgeIndex begin = 0;
  EdgeIndex end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const EvalBatch&, const EvalBatch&) = default;
};

DyTagStore ingest_dataset(const DatasetFiles& files, bool bipartite);
/// Writes the canonical four-file layout.
void export_dataset(const DyTagStore& store, const DatasetFiles& files);

/// Column names for the DTGB import adapter.
struct DtgbLayout {
  std::string src_column = "u";
  std::string dst_column = "i";
  std::string ts_column = "ts";
  std::string label_column = "label";
  std::string text_id_column = "r";
  std::string id_column = "i";
  std::string text_column = "text";
};

/// Converts DTGB-style files (edge_list.csv, entity_text.csv, relation_text.csv,
/// and a label file) into the canonical layout under `out_dir`.
DatasetFiles import_dtgb(const std::filesystem::path& dataset_dir,
                         const std::filesystem::path& out_dir, const DtgbLayout& layout = {});

/// train_end = floor(train_frac*|E|), valid_end = floor((train_frac+valid_frac)*|E|).
SplitView chronological_split(const DyTagStore& store, double train_frac, double valid_frac);

/// The `sample_count` earliest test edges in batches of `batch_size`; the last
/// batch may be short. Clamps to the test size.
std::vector<EvalBatch> select_eval_window(const SplitView& split, std::size_t sample_count,
                                          std::size_t batch_size);

/// N_t(node): counterparts of edges incident to node with ts < t, ascending.
std::vector<NodeId> neighbors_before(const DyTagStore& store, NodeId node, Timestamp t,
                                     Direction direction = Direction::undirected);

/// Binary cache with an embedded format version.
inline constexpr std::uint32_t kStoreFormatVersion = 1;
void save_store(const DyTagStore& store, const std::filesystem::path& path);
DyTagStore load_store(const std::filesystem::path& path);

}  // namespace dytag
