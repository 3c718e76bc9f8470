#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dytag/graph_store.hpp"
#include "dytag/llm_gateway.hpp"
#include "dytag/prediction.hpp"

namespace dytag {

/// One flat JSON document describes a run. Relative paths resolve against
/// the directory holding the config file. Credentials come from LLM_API_KEY.
struct RunConfig {
  // Dataset: the four canonical files, or a binary store cache.
  std::optional<std::filesystem::path> edges;
  std::optional<std::filesystem::path> node_texts;
  std::optional<std::filesystem::path> edge_texts;
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> store;
  std::string dataset_name;
  std::string description;
  bool bipartite = false;
  double train_frac = 0.7;
  double valid_frac = 0.15;

  // Backend.
  BackendKind backend = BackendKind::mock;
  std::string endpoint;
  std::string model = "gpt-4o-mini";
  double temperature = 0;
  int max_tokens = 1024;
  std::size_t max_in_flight = 8;
  std::optional<std::filesystem::path> mock_rules;
  std::optional<std::filesystem::path> replay_transcript;
  std::string api_key;  // never serialized

  // Run.
  std::uint64_t seed = 0;
  std::size_t sample_count = 10240;
  std::size_t batch_size = 256;
  PromptMode mode = PromptMode::gad;
  std::vector<Task> tasks = {Task::lp, Task::nr, Task::ec};
  std::filesystem::path run_dir = "run";
  std::filesystem::path knowledge_cache;  // default run_dir/knowledge.json
  std::filesystem::path transcript;       // default run_dir/transcript.jsonl
  bool use_edge_text = false;
  bool force_regenerate = false;
  double local_fraction = 0.10;
  std::size_t trajectories = 50;
  std::size_t text_sample_count = 30;
  std::size_t text_truncation = 50;
  Direction direction = Direction::undirected;
  std::size_t workers = 8;
  std::size_t nr_negatives = 100;
  bool reflection = true;

  /// Every setting with defaults filled in, paths as written. Execution-only
  /// keys (workers, max_in_flight, force_regenerate) are left out.
  nlohmann::ordered_json canonical;

  /// sha256 of the canonical form; stamped into every report.
  std::string digest() const;
  DatasetFiles dataset_files() const;
};

/// Every known key with its default, for documentation and suggestions.
const nlohmann::ordered_json& config_defaults();

struct ConfigResult {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;
};

/// Validates the whole document and reports every problem at once.
/// `api_key` stands in for the environment variable.
ConfigResult parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                          std::optional<std::string> api_key);

/// Reads and validates a config file, taking the key from LLM_API_KEY.
/// Throws ConfigError listing every problem, one per line.
RunConfig load_config(const std::filesystem::path& path);

/// Closest known key within edit distance 3, for "did you mean" hints.
std::optional<std::string> suggest_key(std::string_view unknown);

}  // namespace dytag
