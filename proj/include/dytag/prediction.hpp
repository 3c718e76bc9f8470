#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dytag/graph_store.hpp"
#include "dytag/knowledge.hpp"
#include "dytag/llm_gateway.hpp"
#include "dytag/metrics.hpp"
#include "dytag/recall.hpp"
#include "dytag/rng.hpp"

namespace dytag {

enum class Task { lp, nr, ec };
std::string_view task_name(Task t);  // "lp", "nr", "ec"
std::optional<Task> parse_task(std::string_view s);

enum class PromptMode { text, text_fewshot, structure, structure_fewshot, gad };
std::string_view mode_name(PromptMode m);  // "text", "text-fewshot", ...
std::optional<PromptMode> parse_mode(std::string_view s);
bool is_few_shot(PromptMode m);

/// Stand-in card for modes that run without generated knowledge.
DatasetCard default_dataset_card();

struct FewShotExample {
  std::string blocks;
  std::string answer;
};

struct PromptContext {
  const DyTagStore* store = nullptr;
  PromptMode mode = PromptMode::structure;
  DatasetCard card = default_dataset_card();
  /// Required in GAD mode.
  const KnowledgeStore* knowledge = nullptr;
  /// Edge-classification variant that shows the target edge text.
  bool use_edge_text = false;
  /// Reflection supplement; off for the surrogate predictor that reflection probes.
  bool include_reflection = true;
  std::vector<FewShotExample> examples;
  /// Last resort of the edge-classification fallback chain.
  std::optional<LabelId> global_modal_label;
};

struct Prompt {
  std::string system;
  std::string user;
};

Prompt assemble_lp_prompt(const PairEvidence& e, const PromptContext& ctx);
/// `candidates` in recall order; `source` supplies the source text.
Prompt assemble_nr_prompt(NodeId source, std::string_view source_text, std::span<const Candidate> candidates,
                          const PromptContext& ctx);
Prompt assemble_ec_prompt(const PairEvidence& e, const PromptContext& ctx);

struct PredictionRecord {
  std::size_t index = 0;
  std::size_t batch = 0;
  Task task = Task::lp;
  PromptMode mode = PromptMode::structure;
  NodeId src = 0;
  /// LP/EC destination; the positive destination for NR.
  NodeId dst = 0;
  Timestamp t = 0;
  std::optional<EdgeIndex> edge;

  int truth_link = 0;
  LabelId truth_label = 0;

  int predicted_link = 0;
  LabelId predicted_label = 0;
  /// NR: final order with likelihoods.
  std::vector<std::pair<NodeId, double>> ranking;
  std::size_t pool_size = 0;
  /// NR: 1-based, pessimistic among ties; pool_size + 1 when not ranked.
  std::size_t positive_rank = 0;

  bool fallback_used = false;
  std::vector<std::string> digests;

  nlohmann::json to_json() const;
  static PredictionRecord from_json(const nlohmann::json& j);
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

PredictionRecord predict_link(const PairEvidence& e, int truth, const PromptContext& ctx, ChatGateway& gateway);

/// pool[0] need not be the positive; `positive` identifies it.
PredictionRecord retrieve_nodes(NodeId source, Timestamp t, NodeId positive, std::span<const PairEvidence> pool,
                                const PromptContext& ctx, ChatGateway& gateway);

PredictionRecord classify_edge(const PairEvidence& e, LabelId truth, const PromptContext& ctx,
                               ChatGateway& gateway);

/// Recall and ranking as used by retrieve_nodes for the given context.
std::pair<CandidateSet, CandidateSet> recall_and_rank(NodeId source, Timestamp t,
                                                      std::span<const PairEvidence> pool,
                                                      const PromptContext& ctx);

/// Modal label of the pair history, then the source history, then the global label.
LabelId fallback_label(const PairEvidence& e, std::optional<LabelId> global_modal);

/// Up to `count` destinations drawn uniformly without replacement from
/// `pool` minus `truth`, in draw order.
std::vector<NodeId> sample_negatives(std::span<const NodeId> pool, NodeId truth, std::size_t count, Rng& rng);

/// One example per equal slice of the validation split.
std::vector<FewShotExample> build_few_shot(const SplitView& split, Task task, const PromptContext& ctx,
                                           std::uint64_t seed, std::size_t count = 6,
                                           Direction direction = Direction::undirected);

struct QueryTruth {
  Task task = Task::lp;
  int link = 0;
  NodeId positive = 0;
  std::string label_text;
  /// Target edge text; must not appear unless the variant allows it.
  std::string edge_text;
  bool edge_text_allowed = false;
};

QueryTruth truth_of(const PredictionRecord& r, const DyTagStore& store, bool use_edge_text);

/// Description of the first leak of `truth` into the current-sample section
/// of `user_prompt`, or nullopt when clean.
std::optional<std::string> find_leak(std::string_view user_prompt, const QueryTruth& truth);

struct TaskOptions {
  Task task = Task::lp;
  PromptMode mode = PromptMode::structure;
  std::size_t sample_count = 10240;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  bool use_edge_text = false;
  Direction direction = Direction::undirected;
  std::size_t workers = 8;
  std::size_t nr_negatives = 100;
  std::size_t few_shot = 6;
  /// Completed batches are appended here and skipped on resume.
  std::optional<std::filesystem::path> checkpoint;
};

/// Records in query order. LP emits a positive then its negative per test edge.
std::vector<PredictionRecord> run_task(const SplitView& split, const TaskOptions& opts, ChatGateway& gateway,
                                       const KnowledgeStore* knowledge);

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace dytag
