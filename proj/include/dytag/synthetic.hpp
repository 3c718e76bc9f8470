#pragma once

#include <cstddef>
#include <cstdint>

#include "dytag/graph_store.hpp"

namespace dytag {

/// Seeded random DyTAG for tests, fixtures and benchmarks.
struct SyntheticOptions {
  std::size_t nodes = 40;
  std::size_t edges = 200;
  std::size_t labels = 4;
  std::uint64_t seed = 0;
  /// Sources are the lower half of the ids, destinations the upper half.
  bool bipartite = false;
  /// Probability that an edge repeats an earlier destination of its source.
  double repeat_prob = 0.5;
  /// Probability that a repeated pair keeps the label it had last time.
  double label_stickiness = 0.8;
  /// Skew of node activity; 0 gives uniform sources.
  double zipf = 1.0;
  /// Probability that an edge shares the previous edge's timestamp.
  double tie_prob = 0.1;
  bool self_loops = false;
};

DyTagStore generate_synthetic(const SyntheticOptions& opts);

}  // namespace dytag
