#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dytag/graph_store.hpp"
#include "dytag/metrics.hpp"
#include "dytag/rng.hpp"

namespace dytag {

inline constexpr std::array<std::string_view, 7> kBucketKeys = {"=0", ">0", ">1", ">2",
                                                                 ">3", ">4", ">5"};

enum class Polarity { positive, negative };
std::string_view polarity_name(Polarity p);

struct DistributionDict {
  Metric metric = Metric::hi;
  Polarity polarity = Polarity::positive;
  /// Proportions in kBucketKeys order.
  std::array<double, 7> buckets{};
  std::size_t samples = 0;

  double at(std::string_view key) const;
  nlohmann::json to_json() const;
};

/// Bucket proportions of one polarity's metric values. Throws UsageError when empty.
DistributionDict distribution_of(std::span<const double> values, Metric metric, Polarity polarity);

/// (positive, negative) distributions of `metric` over evidence bundles.
std::pair<DistributionDict, DistributionDict> metric_distribution(
    std::span<const PairEvidence> positives, std::span<const PairEvidence> negatives, Metric metric);

struct PreferenceDict {
  EldScope scope = EldScope::pair;
  double top1 = 0;
  double top2 = 0;
  double top3 = 0;
  double others = 0;
  std::size_t counted_samples = 0;

  nlohmann::json to_json() const;
};

struct PreferenceSample {
  EdgeLabelDistribution history;
  LabelId truth = 0;
};

/// Rank of the true label in each nonempty history; empty histories are skipped.
PreferenceDict eld_preference(std::span<const PreferenceSample> samples, EldScope scope);

struct TextSample {
  std::string src_text;
  std::string dst_text;
  std::string edge_text;
  std::string label_text;
  /// Destination text of the matching negative sample, when prepared.
  std::string negative_dst_text;
};

struct TextSampleSet {
  std::vector<TextSample> samples;
  std::size_t count = 0;
  std::size_t truncation = 0;

  nlohmann::json to_json() const;
};

/// First `max_chars` UTF-8 code points of `s`.
std::string truncate_chars(std::string_view s, std::size_t max_chars);

/// Validation edges at positions floor(i*N/count), texts truncated.
TextSampleSet sample_texts(const SplitView& split, std::size_t count = 30, std::size_t truncation = 50);

/// Destinations eligible as negatives: the destination partition for
/// bipartite stores, otherwise every registered node. Ascending.
std::vector<NodeId> negative_pool(const DyTagStore& store);

/// Uniform draw from `pool` excluding `truth`. Throws UsageError when no
/// other destination exists.
NodeId draw_negative(std::span<const NodeId> pool, NodeId truth, Rng& rng);

/// One negative per validation edge: same source and timestamp, fresh destination.
std::vector<PairQuery> build_negative_validation_samples(const SplitView& split, std::uint64_t seed);

/// Everything the global summary agents consume.
struct PrepStatistics {
  std::vector<DistributionDict> distributions;  // HI, CN, DNF x (positive, negative)
  std::vector<PreferenceDict> preferences;      // source, destination, pair
  TextSampleSet text_samples;
  std::size_t validation_edges = 0;
  std::uint64_t seed = 0;

  const DistributionDict& distribution(Metric m, Polarity p) const;
  const PreferenceDict& preference(EldScope s) const;
  nlohmann::json to_json() const;
  static PrepStatistics from_json(const nlohmann::json& j);
};

inline constexpr int kPrepSchemaVersion = 1;

PrepStatistics prepare_statistics(const SplitView& split, std::uint64_t seed,
                                  Direction direction = Direction::undirected, std::size_t text_count = 30,
                                  std::size_t truncation = 50);

}  // namespace dytag
