#include "dytag/synthetic.hpp"

#include <spdlog/fmt/fmt.h>

#include <cmath>
#include <unordered_map>
#include <vector>

#include "dytag/error.hpp"
#include "dytag/rng.hpp"

namespace dytag {

namespace {

constexpr const char* kTopics[] = {"finance", "travel", "music", "sports", "science", "cooking", "legal", "health"};
constexpr const char* kVerbs[] = {"asks about", "shares notes on", "replies regarding", "schedules", "reviews"};

std::size_t weighted_pick(const std::vector<double>& cumulative, Rng& rng) {
  const double x = rng.uniform() * cumulative.back();
  std::size_t lo = 0, hi = cumulative.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (cumulative[mid] > x)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

std::vector<double> zipf_cumulative(std::size_t n, double s) {
  std::vector<double> c(n);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) c[i] = acc += 1.0 / std::pow(static_cast<double>(i + 1), s);
  return c;
}

}  // namespace

DyTagStore generate_synthetic(const SyntheticOptions& opts) {
  if (opts.nodes < 2 || opts.edges == 0 || opts.labels == 0)
    throw UsageError("synthetic graph needs at least 2 nodes, 1 edge and 1 label");
  if (opts.bipartite && opts.nodes < 4) throw UsageError("bipartite synthetic graph needs at least 4 nodes");
  Rng rng(opts.seed);

  // Ids start at 1; bipartite stores put sources first.
  const std::size_t n_src = opts.bipartite ? opts.nodes / 2 : opts.nodes;
  const std::size_t n_dst = opts.bipartite ? opts.nodes - n_src : opts.nodes;
  const NodeId dst_base = opts.bipartite ? static_cast<NodeId>(n_src + 1) : 1;
  const auto src_weights = zipf_cumulative(n_src, opts.zipf);
  const auto dst_weights = zipf_cumulative(n_dst, opts.zipf);

  TextTable node_texts, edge_texts, labels;
  for (std::size_t i = 1; i <= opts.nodes; ++i) {
    const char* topic = kTopics[rng.below(std::size(kTopics))];
    node_texts.insert(static_cast<NodeId>(i), fmt::format("entity {} interested in {}", i, topic));
  }
  for (std::size_t l = 0; l < opts.labels; ++l) labels.insert(static_cast<LabelId>(l), fmt::format("class_{}", l));

  std::unordered_map<NodeId, std::vector<NodeId>> history;
  std::unordered_map<std::uint64_t, LabelId> last_label;
  std::vector<TemporalEdge> edges;
  edges.reserve(opts.edges);
  Timestamp ts = 0;
  for (std::size_t i = 0; i < opts.edges; ++i) {
    if (i == 0 || rng.uniform() >= opts.tie_prob) ts += 1 + static_cast<double>(rng.below(3));
    const NodeId src = static_cast<NodeId>(1 + weighted_pick(src_weights, rng));
    auto& past = history[src];
    NodeId dst = 0;
    if (!past.empty() && rng.uniform() < opts.repeat_prob) {
      dst = past[rng.below(past.size())];
    } else {
      do {
        dst = static_cast<NodeId>(dst_base + weighted_pick(dst_weights, rng));
      } while (dst == src && !opts.self_loops);
    }
    past.push_back(dst);

    const std::uint64_t key = (static_cast<std::uint64_t>(src) << 32) | dst;
    LabelId label = static_cast<LabelId>(rng.below(opts.labels));
    if (auto it = last_label.find(key); it != last_label.end() && rng.uniform() < opts.label_stickiness)
      label = it->second;
    last_label[key] = label;

    const TextId text_id = static_cast<TextId>(i);
    edge_texts.insert(text_id, fmt::format("{} {} topic {}", kVerbs[rng.below(std::size(kVerbs))],
                                           kTopics[label % std::size(kTopics)], label));
    edges.push_back({src, dst, ts, label, text_id});
  }
  return DyTagStore::build(std::move(edges), std::move(node_texts), std::move(edge_texts), std::move(labels),
                           opts.bipartite);
}

}  // namespace dytag
