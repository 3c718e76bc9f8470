#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dytag/agents.hpp"
#include "dytag/graph_store.hpp"
#include "dytag/knowledge.hpp"
#include "dytag/llm_gateway.hpp"
#include "dytag/metrics.hpp"

namespace dytag {

/// One probed validation negative and what the surrogate predictor answered.
struct Trajectory {
  PairEvidence evidence;
  int prediction = 0;
};

struct TrajectorySet {
  /// False positives only, at most the requested count.
  std::vector<Trajectory> false_positives;
  std::size_t probed = 0;
  std::size_t correct = 0;
  std::vector<std::string> digests;

  double accuracy() const { return probed ? static_cast<double>(correct) / static_cast<double>(probed) : 0.0; }
};

/// Probes the first 4 * count validation negatives with the knowledge-driven
/// link predictor (without any reflection supplement) and keeps the first
/// `count` false positives. Accuracy covers every probed negative.
TrajectorySet collect_trajectories(const SplitView& split, const KnowledgeStore& knowledge, ChatGateway& gateway,
                                   std::size_t count = 50, std::uint64_t seed = 0,
                                   Direction direction = Direction::undirected, std::size_t workers = 8);

/// Reflection agent. A malformed response yields "Not Significant"; a
/// "Significant" verdict without a supplementation is treated the same way.
AgentResult<ReflectionOutcome> run_reflection(const TrajectorySet& trajectories, const GlobalLinkKnowledge& knowledge,
                                              ChatGateway& gateway);

}  // namespace dytag
