#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dytag/config.hpp"
#include "dytag/eval.hpp"
#include "dytag/graph_store.hpp"
#include "dytag/knowledge.hpp"
#include "dytag/llm_gateway.hpp"
#include "dytag/prediction.hpp"
#include "dytag/stats_prep.hpp"

namespace dytag {

inline constexpr int kManifestSchemaVersion = 1;

struct StageRecord {
  std::string name;
  /// Input name -> content hash.
  std::map<std::string, std::string> inputs;
  /// Artifact path relative to the run directory -> sha256.
  std::map<std::string, std::string> outputs;
};

/// Artifact inventory of one run. Wall-clock fields are written but never
/// compared.
struct Manifest {
  std::string config_digest;
  bool complete = false;
  std::vector<StageRecord> stages;
  std::string started_at;
  std::string finished_at;

  const StageRecord* stage(std::string_view name) const;
  nlohmann::ordered_json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
  /// The manifest without wall-clock fields, for comparisons.
  std::string stable_dump() const;
};

/// Hash of a transcript that ignores timing fields and line order, so
/// concurrent runs of the same work hash equally.
std::string transcript_hash(const std::filesystem::path& path);

/// Builds the backend named by the config. The heuristic mock answers
/// edge classification fallbacks with `global_modal_label`.
std::shared_ptr<ChatBackend> make_backend(const RunConfig& cfg, const std::string& global_modal_label);

/// Stage orchestration over one run directory. Each accessor computes its
/// stage on first use, reusing cached artifacts whose inputs are unchanged.
class Pipeline {
 public:
  /// `carry_stages` keeps stage records of the previous manifest, for
  /// subcommands that run a single stage.
  explicit Pipeline(RunConfig cfg, bool carry_stages = false);
  ~Pipeline();

  const RunConfig& config() const { return cfg_; }
  const DyTagStore& store();
  SplitView split();
  const PrepStatistics& prep();
  ChatGateway& gateway();
  /// Full knowledge generation (GAD): initial, global, local and reflection agents.
  const KnowledgeStore& knowledge();
  /// Individual knowledge steps; each saves the knowledge file.
  const KnowledgeStore& summarize_global();
  const KnowledgeStore& summarize_local();
  const KnowledgeStore& reflect();
  /// Uses an existing knowledge file as is.
  const KnowledgeStore& load_knowledge(const std::filesystem::path& path);
  /// Reads predictions written by an earlier invocation.
  const std::vector<PredictionRecord>& load_predictions(Task task);
  const std::vector<PredictionRecord>& predictions(Task task);
  EvalReport report(Task task);

  /// Every stage in order. Writes the manifest with complete=false and
  /// rethrows when a stage fails.
  void run();

  const Manifest& manifest() const { return manifest_; }
  std::filesystem::path path_of(const std::string& artifact) const;
  void write_manifest();

 private:
  void record(StageRecord stage);
  std::string knowledge_input_hash();
  void save_knowledge(const std::string& steps);
  KnowledgeStore& require_knowledge();
  std::string store_hash();

  RunConfig cfg_;
  Manifest manifest_;
  std::optional<Manifest> previous_;
  std::unique_ptr<DyTagStore> store_;
  std::optional<std::string> store_hash_;
  std::optional<PrepStatistics> prep_;
  std::unique_ptr<ChatGateway> gateway_;
  std::optional<KnowledgeStore> knowledge_;
  std::map<Task, std::vector<PredictionRecord>> predictions_;
};

}  // namespace dytag
