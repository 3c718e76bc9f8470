#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dytag/graph_store.hpp"
#include "dytag/knowledge.hpp"
#include "dytag/metrics.hpp"

namespace dytag {

inline constexpr std::size_t kCandidateCap = 20;

struct Candidate {
  NodeId node = 0;
  PairEvidence evidence;
};

struct Exclusion {
  NodeId node = 0;
  /// nullopt when excluded by the default rule (HI = 0 and CN = 0).
  std::optional<ThresholdRule> rule;
};

struct CandidateSet {
  NodeId source = 0;
  Timestamp t = 0;
  std::vector<Candidate> candidates;
  std::vector<Exclusion> excluded;
  std::size_t cap = kCandidateCap;
};

/// Keeps candidates with HI > 0 or CN > 0. Pool order is preserved.
CandidateSet default_recall(NodeId source, Timestamp t, std::span<const PairEvidence> pool);
CandidateSet default_recall(const DyTagStore& store, NodeId source, std::span<const NodeId> pool, Timestamp t,
                            Direction direction = Direction::undirected);

/// Excludes candidates matching any rule; the first matching rule is
/// recorded. An empty rule list falls back to default_recall.
CandidateSet apply_thresholds(NodeId source, Timestamp t, std::span<const PairEvidence> pool,
                              std::span<const ThresholdRule> rules);

struct RankKey {
  Metric metric = Metric::hi;
  bool descending = true;
  friend bool operator==(const RankKey&, const RankKey&) = default;
};

/// Metrics rated Extremely Significant, Helpful or Maybe Related, most
/// significant first (HI, CN, DNF within a level), each in its favored
/// direction. Falls back to HI descending when none qualify.
std::vector<RankKey> rank_keys(const GlobalLinkKnowledge* knowledge);

/// Strict weak order over candidates; node id breaks ties, making it total.
bool candidate_before(const Candidate& a, const Candidate& b, std::span<const RankKey> keys);

/// Sorts by the knowledge-derived keys and truncates to the cap.
CandidateSet rank_candidates(CandidateSet set, const GlobalLinkKnowledge* knowledge);
CandidateSet rank_candidates(CandidateSet set, std::span<const RankKey> keys);

nlohmann::json recall_debug_json(const CandidateSet& ranked, const CandidateSet& unranked,
                                 std::span<const RankKey> keys);

}  // namespace dytag
