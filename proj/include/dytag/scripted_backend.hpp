#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "dytag/llm_gateway.hpp"
#include "dytag/types.hpp"

namespace dytag {

enum class CompareOp { lt, gt, le, ge, eq };
std::optional<CompareOp> parse_compare_op(std::string_view s);
std::string_view compare_op_symbol(CompareOp op);
bool compare(double lhs, CompareOp op, double rhs);

struct MetricPredicate {
  Metric metric = Metric::hi;
  CompareOp op = CompareOp::gt;
  double value = 0;
};

struct MockMatcher {
  enum class Type { substring, regex, metric, any };
  Type type = Type::any;
  std::string pattern;
  std::optional<std::regex> compiled;
  std::vector<MetricPredicate> predicates;  // all must hold
  /// Restricts the rule to requests whose purpose equals this tag.
  std::optional<std::string> task;
};

struct MockRule {
  MockMatcher match;
  /// Response text; {src_id} and {dst_id} are replaced from the prompt.
  std::string respond;
};

/// Values read back from the current-sample section of a predictor prompt.
struct PromptSample {
  std::optional<NodeId> src;
  std::optional<NodeId> dst;
  std::optional<double> hi;
  std::optional<double> cn;
  std::optional<double> dnf;
  std::vector<NodeId> candidates;           // NR, in prompt order
  std::map<NodeId, double> candidate_hi;    // NR
  nlohmann::ordered_json eld_src;           // EC, null when absent
  nlohmann::ordered_json eld_dst;
  nlohmann::ordered_json eld_pair;
  std::vector<std::string> edge_classes;    // EC
};

PromptSample parse_prompt_sample(std::string_view prompt);

struct HeuristicConfig {
  /// Used for EC when neither pair nor source history exists.
  std::string global_modal_label;
};

/// The built-in deterministic answers keyed by request purpose.
/// Throws MockMissError for unknown purposes.
std::string heuristic_response(const ChatRequest& r, const HeuristicConfig& cfg);

/// First matching rule wins; when no rule matches, the heuristic answers if
/// enabled, otherwise MockMissError.
class ScriptedBackend : public ChatBackend {
 public:
  ScriptedBackend(std::vector<MockRule> rules, std::optional<HeuristicConfig> heuristic);
  ChatResponse complete(const ChatRequest& r) override;
  BackendKind kind() const override { return BackendKind::mock; }

  /// JSON list of {"match": {...}, "respond": "..."}; see README for matchers.
  static std::vector<MockRule> load_rules(const std::filesystem::path& path);
  static std::vector<MockRule> parse_rules(const nlohmann::json& j);

 private:
  std::vector<MockRule> rules_;
  std::optional<HeuristicConfig> heuristic_;
};

std::shared_ptr<ScriptedBackend> make_heuristic_mock(HeuristicConfig cfg = {});

}  // namespace dytag
