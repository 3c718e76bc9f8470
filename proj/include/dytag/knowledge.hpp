#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dytag/metrics.hpp"
#include "dytag/scripted_backend.hpp"
#include "dytag/types.hpp"

namespace dytag {

/// Ordered from most to least significant.
enum class Significance { extremely_significant, helpful, maybe_related, not_relevant };
std::string_view significance_name(Significance s);
std::optional<Significance> parse_significance(std::string_view s);

enum class Favors { high, low };

inline constexpr std::string_view kNotSignificant = "Not Significant";

struct DatasetCard {
  std::string task_type;
  std::string graph_type;
  std::string node_type;
  std::string node_text_type;
  std::string edge_type;
  std::string edge_text_type;
  friend bool operator==(const DatasetCard&, const DatasetCard&) = default;
};

struct MetricKnowledge {
  Significance significance = Significance::not_relevant;
  std::string explanation;
  Favors favors = Favors::high;
  std::string positive_indicator;
  std::string negative_indicator;
  friend bool operator==(const MetricKnowledge&, const MetricKnowledge&) = default;
};

struct TextKnowledge {
  Significance significance = Significance::not_relevant;
  std::string reason;
  std::string explanation;
  friend bool operator==(const TextKnowledge&, const TextKnowledge&) = default;
};

struct GlobalLinkKnowledge {
  TextKnowledge text;
  std::map<Metric, MetricKnowledge> metrics;
  std::string overall_positive;
  std::string overall_negative;
  std::string overall_rules;

  const MetricKnowledge* metric(Metric m) const;
  friend bool operator==(const GlobalLinkKnowledge&, const GlobalLinkKnowledge&) = default;
};

struct GuidanceKnowledge {
  Significance significance = Significance::not_relevant;
  std::string reason;
  std::string guidance;
  friend bool operator==(const GuidanceKnowledge&, const GuidanceKnowledge&) = default;
};

struct GlobalEdgeLabelKnowledge {
  GuidanceKnowledge node_text;
  /// Usable only by the edge-text classification variant.
  GuidanceKnowledge edge_text;
  GuidanceKnowledge eld;
  friend bool operator==(const GlobalEdgeLabelKnowledge&, const GlobalEdgeLabelKnowledge&) = default;
};

enum class Combinator { all, any };

struct ThresholdClause {
  Metric metric = Metric::hi;
  CompareOp op = CompareOp::lt;
  double value = 0;
  friend bool operator==(const ThresholdClause&, const ThresholdClause&) = default;
};

/// Exclude-as-negative rule.
struct ThresholdRule {
  Combinator combinator = Combinator::all;
  std::vector<ThresholdClause> clauses;

  bool matches(const PairEvidence& e) const;
  std::string describe() const;
  friend bool operator==(const ThresholdRule&, const ThresholdRule&) = default;
};

struct NodeProfile {
  std::string node_description;
  std::string neighbor_preference;
  std::string edge_text_preference;
  std::string edge_label_preference;
  std::string structural_preference;
  std::string explanation;
  friend bool operator==(const NodeProfile&, const NodeProfile&) = default;
};

struct ReflectionOutcome {
  bool significant = false;
  std::string supplementation;
  friend bool operator==(const ReflectionOutcome&, const ReflectionOutcome&) = default;
};

inline constexpr int kKnowledgeSchemaVersion = 1;

struct KnowledgeStore {
  std::optional<DatasetCard> dataset_card;
  std::optional<GlobalLinkKnowledge> global_link;
  std::optional<GlobalEdgeLabelKnowledge> global_edge_label;
  std::map<std::string, std::vector<ThresholdRule>> thresholds;  // task key, e.g. "NR"
  std::map<NodeId, NodeProfile> local_profiles;
  std::map<std::string, ReflectionOutcome> reflection;  // task key, e.g. "LP"
  /// Knowledge field -> transcript digests of the calls that produced it.
  std::map<std::string, std::vector<std::string>> provenance;

  const std::vector<ThresholdRule>& rules_for(std::string_view task) const;
  const ReflectionOutcome* reflection_for(std::string_view task) const;
  const NodeProfile* profile(NodeId n) const;

  nlohmann::json to_json() const;
  /// Throws ConfigError for unknown metrics, operators or significance levels.
  static KnowledgeStore from_json(const nlohmann::json& j);
  /// Pretty-printed with sorted keys; save(load(x)) reproduces x byte for byte.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static KnowledgeStore load(const std::filesystem::path& path);

  friend bool operator==(const KnowledgeStore&, const KnowledgeStore&) = default;
};

/// Items the predictor may show, in display order: node text then HI, CN, DNF.
enum class KnowledgeItem { text, hi, cn, dnf };

/// Items at Extremely Significant or Helpful; Maybe Related ones when none qualify.
std::vector<KnowledgeItem> included_link_items(const GlobalLinkKnowledge& k);

enum class EdgeLabelItem { node_text, edge_text, eld };
std::vector<EdgeLabelItem> included_edge_label_items(const GlobalEdgeLabelKnowledge& k,
                                                     bool use_edge_text);

}  // namespace dytag
