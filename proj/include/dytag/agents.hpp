#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dytag/graph_store.hpp"
#include "dytag/knowledge.hpp"
#include "dytag/llm_gateway.hpp"
#include "dytag/metrics.hpp"
#include "dytag/stats_prep.hpp"

namespace dytag {

/// Agent output together with the transcript digests of the calls behind it.
template <class T>
struct AgentResult {
  T value;
  std::vector<std::string> digests;
};

/// Fills the global description template from a dataset card.
std::string global_description(const DatasetCard& card);

/// Throws ParseError when the card cannot be parsed after one re-ask.
AgentResult<DatasetCard> run_initial_agent(std::string_view description, std::string_view task_name,
                                           ChatGateway& gateway);

struct GlobalLinkResult {
  GlobalLinkKnowledge knowledge;
  /// Exclude-as-negative rules; rules touching a Not Relevant metric are dropped.
  std::vector<ThresholdRule> thresholds;
  std::vector<std::string> digests;
};

/// Structure agent and text agent. Throws ParseError when either response
/// stays malformed after one re-ask.
GlobalLinkResult run_global_link_summary(const PrepStatistics& prep, const DatasetCard& card,
                                         ChatGateway& gateway);

/// Edge-text agent and edge-label-distribution agent.
AgentResult<GlobalEdgeLabelKnowledge> run_global_edge_label_summary(const PrepStatistics& prep,
                                                                    const DatasetCard& card,
                                                                    ChatGateway& gateway);

/// Nodes ranked by frequency over train+validation (ties by id), top
/// ceil(fraction * |active|).
std::vector<NodeId> select_active_nodes(const SplitView& split, double fraction = 0.10);

/// What a local summary agent sees about one node. Built from train and
/// validation edges only.
struct LocalEvidence {
  NodeId node = 0;
  std::string node_text;
  NodeActivity activity;
  std::size_t neighbor_count = 0;
  /// Most recent interactions first, at most the configured cap.
  std::vector<std::string> interactions;
  EdgeLabelDistribution labels{EldScope::source, 0, {}};
};

inline constexpr std::size_t kLocalInteractionCap = 30;

LocalEvidence local_evidence(const SplitView& split, NodeId node, std::size_t cap = kLocalInteractionCap,
                             std::size_t truncation = 50);

/// Text profile plus structural preference. nullopt when either response
/// stays malformed after one re-ask; the failure is logged.
std::optional<AgentResult<NodeProfile>> run_local_summary(const LocalEvidence& evidence,
                                                          const DyTagStore& store,
                                                          const DatasetCard& card,
                                                          ChatGateway& gateway);

/// Local summaries for `nodes`, computed concurrently. Failed nodes are absent.
std::map<NodeId, AgentResult<NodeProfile>> run_local_summaries(const SplitView& split,
                                                              const std::vector<NodeId>& nodes,
                                                              const DatasetCard& card,
                                                              ChatGateway& gateway,
                                                              std::size_t workers = 8);

/// Human-readable digest of the global link knowledge restricted to the
/// items the predictor may use. Shared by predictor and reflection prompts.
std::string describe_link_knowledge(const GlobalLinkKnowledge& k);
std::string describe_edge_label_knowledge(const GlobalEdgeLabelKnowledge& k, bool use_edge_text);

/// Profile lines without "Not Significant" fields; empty when nothing remains.
std::string describe_profile(const NodeProfile& p);

}  // namespace dytag
