#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dytag/graph_store.hpp"
#include "dytag/prediction.hpp"

namespace dytag {

inline constexpr int kReportSchemaVersion = 1;

/// Metrics are fractions in [0, 1]; rendering converts to percentages.
struct EvalReport {
  Task task = Task::lp;
  PromptMode mode = PromptMode::structure;
  std::string dataset;
  std::size_t n_samples = 0;
  std::map<std::string, double> metrics;
  /// Same metrics per evaluation batch, keyed by batch index.
  std::map<std::size_t, std::map<std::string, double>> per_batch;
  std::string config_digest;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  /// Plain-text table, percentages at two decimals.
  std::string render_text() const;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Accuracy over positives and their paired negatives. Throws UsageError when empty.
EvalReport score_lp(std::span<const PredictionRecord> records);

/// hits@k from the recorded pessimistic ranks. Throws UsageError when empty.
EvalReport score_nr(std::span<const PredictionRecord> records, const std::vector<std::size_t>& ks = {1, 3, 10});

/// Weighted precision, recall and F1 with support weights; zero division
/// counts as 0. Throws UsageError when empty.
EvalReport score_ec(std::span<const PredictionRecord> records);

struct WeightedScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Weighted scores over parallel truth/prediction label vectors.
WeightedScores weighted_prf(std::span<const LabelId> truth, std::span<const LabelId> predicted);

enum class Grouping { pair, edge_text };

struct ConsistencyReport {
  std::optional<double> pair_consistency;
  std::optional<double> text_consistency;
  std::size_t pair_groups = 0;
  std::size_t text_groups = 0;
  double repeated_pair_fraction = 0;
  double repeated_text_fraction = 0;

  nlohmann::json to_json() const;
  std::string render_text() const;
};

struct ConsistencyOptions {
  bool directed = false;
  double min_fraction_repeated = 0.10;
  /// Edge range [begin, end); the full dataset by default.
  std::size_t begin = 0;
  std::optional<std::size_t> end;
};

/// Share of interactions in repeated groups that carry the group's modal
/// label (ties by earliest occurrence). Absent when repeated-group
/// interactions are under the minimum fraction. Edges without text are
/// ignored by the text grouping.
ConsistencyReport label_consistency(const DyTagStore& store, const ConsistencyOptions& opts = {});

struct ParetoReport {
  double fraction = 0;
  std::vector<NodeId> selected;
  double coverage_all = 0;
  double coverage_test = 0;

  nlohmann::json to_json() const;
  std::string render_text() const;
};

/// Coverage of all interactions and of test interactions by the top
/// `fraction` nodes ranked on train plus validation frequency.
ParetoReport pareto_coverage(const SplitView& split, double fraction = 0.10);

}  // namespace dytag
