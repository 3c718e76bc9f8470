#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dytag/graph_store.hpp"
#include "dytag/types.hpp"

namespace dytag {

struct NodeActivity {
  std::uint64_t frequency = 0;
  std::uint64_t times_as_source = 0;
  std::uint64_t times_as_destination = 0;
  /// Mean total frequency of distinct historical neighbors; 0 without neighbors.
  double avg_neighbor_frequency = 0;

  friend bool operator==(const NodeActivity&, const NodeActivity&) = default;
};

struct LabelCount {
  LabelId label = 0;
  std::uint64_t count = 0;
  friend bool operator==(const LabelCount&, const LabelCount&) = default;
};

enum class EldScope { source, destination, pair };
std::string_view eld_scope_name(EldScope s);

/// Label histogram over qualifying historical edges. Entries are kept in
/// order of first occurrence, which is also the tie-break for rankings.
struct EdgeLabelDistribution {
  EldScope scope = EldScope::pair;
  Timestamp cutoff = 0;
  std::vector<LabelCount> counts;

  void add(LabelId label, std::uint64_t n = 1);
  std::uint64_t total() const;
  std::uint64_t count_of(LabelId label) const;
  bool empty() const { return counts.empty(); }
  /// Descending count, ties by first occurrence.
  std::vector<LabelCount> ranked() const;
  std::optional<LabelId> modal() const;

  friend bool operator==(const EdgeLabelDistribution&, const EdgeLabelDistribution&) = default;
};

struct PairEvidence {
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp t = 0;
  std::uint64_t hi = 0;
  std::uint64_t cn = 0;
  NodeActivity src_activity;
  NodeActivity dst_activity;
  EdgeLabelDistribution eld_src{EldScope::source, 0, {}};
  EdgeLabelDistribution eld_dst{EldScope::destination, 0, {}};
  EdgeLabelDistribution eld_pair{EldScope::pair, 0, {}};
  std::string src_text;
  std::string dst_text;
  std::optional<std::string> edge_text;

  /// HI, CN, or DNF (destination frequency).
  double metric(Metric m) const;

  friend bool operator==(const PairEvidence&, const PairEvidence&) = default;
};

struct PairQuery {
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp t = 0;
  /// Target edge; needed only to resolve its text for the edge-text variant.
  std::optional<EdgeIndex> edge;
};

struct EvidenceOptions {
  bool include_edge_text = false;
  Direction direction = Direction::undirected;
};

// Per-query functions. Unknown nodes yield zeros. All counts use ts < t.
std::uint64_t historical_interaction_count(const DyTagStore& store, NodeId u, NodeId v, Timestamp t,
                                           Direction direction = Direction::undirected);
std::uint64_t common_neighbor_count(const DyTagStore& store, NodeId u, NodeId v, Timestamp t,
                                    Direction direction = Direction::undirected);
NodeActivity node_activity(const DyTagStore& store, NodeId n, Timestamp t,
                           Direction direction = Direction::undirected);
EdgeLabelDistribution node_label_distribution(const DyTagStore& store, NodeId n, Timestamp t,
                                              EldScope scope = EldScope::source);
EdgeLabelDistribution pair_label_distribution(const DyTagStore& store, NodeId u, NodeId v,
                                              Timestamp t,
                                              Direction direction = Direction::undirected);
PairEvidence pair_evidence(const DyTagStore& store, const PairQuery& q,
                           const EvidenceOptions& opts = {});

/// Forward-only incremental index. advance_to(t) folds every edge with ts < t;
/// evidence() then answers for cutoff t in time proportional to node degrees.
class EvidenceCursor {
 public:
  explicit EvidenceCursor(const DyTagStore& store, EvidenceOptions opts = {});

  /// Throws UsageError when t is earlier than the current cutoff.
  void advance_to(Timestamp t);
  Timestamp cutoff() const { return cutoff_; }
  std::size_t folded() const { return next_; }

  PairEvidence evidence(const PairQuery& q) const;
  NodeActivity activity(NodeId n) const;
  std::uint64_t hi(NodeId u, NodeId v) const;
  std::uint64_t cn(NodeId u, NodeId v) const;
  EdgeLabelDistribution node_eld(NodeId n, EldScope scope) const;
  EdgeLabelDistribution pair_eld(NodeId u, NodeId v) const;

 private:
  struct NodeState {
    std::uint64_t as_source = 0;
    std::uint64_t as_destination = 0;
    std::unordered_set<NodeId> neighbors;
    std::vector<LabelCount> labels;
  };
  struct PairState {
    std::uint64_t count = 0;
    std::vector<LabelCount> labels;
  };

  std::uint64_t pair_key(NodeId u, NodeId v) const;
  const NodeState* node(NodeId n) const;
  void fold(const TemporalEdge& e);

  const DyTagStore* store_;
  EvidenceOptions opts_;
  Timestamp cutoff_ = -1;
  bool started_ = false;
  std::size_t next_ = 0;
  std::vector<NodeState> nodes_;
  std::unordered_map<std::uint64_t, PairState> pairs_;
};

/// Same results as pair_evidence per query. Queries must be sorted by t.
std::vector<PairEvidence> batch_evidence(const DyTagStore& store, std::span<const PairQuery> queries,
                                         const EvidenceOptions& opts = {});

nlohmann::json to_json(const NodeActivity& a);
nlohmann::json to_json(const EdgeLabelDistribution& d, const DyTagStore* store = nullptr);
nlohmann::json to_json(const PairEvidence& e, const DyTagStore* store = nullptr);

}  // namespace dytag
