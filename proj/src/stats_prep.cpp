#include "dytag/stats_prep.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

#include "dytag/error.hpp"

namespace dytag {

std::string_view polarity_name(Polarity p) {
  return p == Polarity::positive ? "positive" : "negative";
}

// ---------------------------------------------------------------------------
// Distributions

double DistributionDict::at(std::string_view key) const {
  for (std::size_t i = 0; i < kBucketKeys.size(); ++i)
    if (kBucketKeys[i] == key) return buckets[i];
  throw UsageError("unknown bucket key " + std::string(key));
}

nlohmann::json DistributionDict::to_json() const {
  nlohmann::json b = nlohmann::json::object();
  for (std::size_t i = 0; i < kBucketKeys.size(); ++i) b[std::string(kBucketKeys[i])] = buckets[i];
  return {{"metric", metric_key(metric)},
          {"polarity", polarity_name(polarity)},
          {"samples", samples},
          {"buckets", b}};
}

DistributionDict distribution_of(std::span<const double> values, Metric metric, Polarity polarity) {
  if (values.empty())
    throw UsageError("no " + std::string(polarity_name(polarity)) + " samples for metric " +
                     std::string(metric_key(metric)));
  std::array<std::size_t, 7> hits{};
  for (double v : values) {
    if (v == 0) ++hits[0];
    for (int k = 0; k <= 5; ++k)
      if (v > k) ++hits[static_cast<std::size_t>(k) + 1];
  }
  DistributionDict d;
  d.metric = metric;
  d.polarity = polarity;
  d.samples = values.size();
  for (std::size_t i = 0; i < hits.size(); ++i)
    d.buckets[i] = static_cast<double>(hits[i]) / static_cast<double>(values.size());
  return d;
}

std::pair<DistributionDict, DistributionDict> metric_distribution(
    std::span<const PairEvidence> positives, std::span<const PairEvidence> negatives, Metric metric) {
  auto values = [&](std::span<const PairEvidence> s) {
    std::vector<double> v;
    v.reserve(s.size());
    for (const auto& e : s) v.push_back(e.metric(metric));
    return v;
  };
  const auto pos = values(positives);
  const auto neg = values(negatives);
  return {distribution_of(pos, metric, Polarity::positive),
          distribution_of(neg, metric, Polarity::negative)};
}

// ---------------------------------------------------------------------------
// Preferences

nlohmann::json PreferenceDict::to_json() const {
  return {{"scope", eld_scope_name(scope)},
          {"counted_samples", counted_samples},
          {"preferences", {{"top1", top1}, {"top2", top2}, {"top3", top3}, {"others", others}}}};
}

PreferenceDict eld_preference(std::span<const PreferenceSample> samples, EldScope scope) {
  std::array<std::size_t, 4> hits{};
  std::size_t counted = 0;
  for (const auto& s : samples) {
    if (s.history.empty()) continue;
    ++counted;
    const auto ranked = s.history.ranked();
    std::size_t slot = 3;
    for (std::size_t r = 0; r < 3 && r < ranked.size(); ++r)
      if (ranked[r].label == s.truth) {
        slot = r;
        break;
      }
    ++hits[slot];
  }
  PreferenceDict d;
  d.scope = scope;
  d.counted_samples = counted;
  if (counted > 0) {
    const double n = static_cast<double>(counted);
    d.top1 = 100.0 * static_cast<double>(hits[0]) / n;
    d.top2 = 100.0 * static_cast<double>(hits[1]) / n;
    d.top3 = 100.0 * static_cast<double>(hits[2]) / n;
    d.others = 100.0 * static_cast<double>(hits[3]) / n;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Text samples

std::string truncate_chars(std::string_view s, std::size_t max_chars) {
  std::size_t chars = 0;
  std::size_t i = 0;
  while (i < s.size() && chars < max_chars) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0)
      len = 4;
    else if (c >= 0xE0)
      len = 3;
    else if (c >= 0xC0)
      len = 2;
    i = std::min(s.size(), i + len);
    ++chars;
  }
  return std::string(s.substr(0, i));
}

nlohmann::json TextSampleSet::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& s : samples)
    arr.push_back({{"src_text", s.src_text},
                   {"dst_text", s.dst_text},
                   {"edge_text", s.edge_text},
                   {"label", s.label_text},
                   {"negative_dst_text", s.negative_dst_text}});
  return {{"count", count}, {"truncation", truncation}, {"samples", arr}};
}

TextSampleSet sample_texts(const SplitView& split, std::size_t count, std::size_t truncation) {
  const auto valid = split.valid();
  if (valid.empty()) throw UsageError("validation split is empty");
  const std::size_t n = valid.size();
  if (count > n) {
    spdlog::info("text sampling clamped from {} to {} validation edges", count, n);
    count = n;
  }
  TextSampleSet set;
  set.count = count;
  set.truncation = truncation;
  const auto& store = *split.store;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& e = valid[i * n / count];
    set.samples.push_back({truncate_chars(store.node_text(e.src), truncation),
                           truncate_chars(store.node_text(e.dst), truncation),
                           truncate_chars(store.edge_text(e), truncation),
                           truncate_chars(store.label_text(e.label), truncation), {}});
  }
  return set;
}

// ---------------------------------------------------------------------------
// Negatives

std::vector<NodeId> negative_pool(const DyTagStore& store) {
  return store.bipartite() ? store.destination_nodes() : store.node_ids();
}

NodeId draw_negative(std::span<const NodeId> pool, NodeId truth, Rng& rng) {
  const bool contains_truth = std::binary_search(pool.begin(), pool.end(), truth);
  const std::size_t eligible = pool.size() - (contains_truth ? 1 : 0);
  if (eligible == 0) throw UsageError("no eligible negative destination exists");
  std::size_t k = rng.below(eligible);
  if (contains_truth) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(pool.begin(), pool.end(), truth) - pool.begin());
    if (k >= pos) ++k;
  }
  return pool[k];
}

std::vector<PairQuery> build_negative_validation_samples(const SplitView& split, std::uint64_t seed) {
  const auto valid = split.valid();
  if (valid.empty()) throw UsageError("validation split is empty");
  const auto pool = negative_pool(*split.store);
  std::vector<PairQuery> out;
  out.reserve(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) {
    auto rng = Rng::derive(seed, split.train_end + i);
    out.push_back({valid[i].src, draw_negative(pool, valid[i].dst, rng), valid[i].ts, std::nullopt});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregate

namespace {

constexpr Metric kMetrics[] = {Metric::hi, Metric::cn, Metric::dnf};
constexpr EldScope kScopes[] = {EldScope::source, EldScope::destination, EldScope::pair};

}  // namespace

const DistributionDict& PrepStatistics::distribution(Metric m, Polarity p) const {
  for (const auto& d : distributions)
    if (d.metric == m && d.polarity == p) return d;
  throw UsageError("missing distribution for " + std::string(metric_key(m)));
}

const PreferenceDict& PrepStatistics::preference(EldScope s) const {
  for (const auto& d : preferences)
    if (d.scope == s) return d;
  throw UsageError("missing preference for scope " + std::string(eld_scope_name(s)));
}

nlohmann::json PrepStatistics::to_json() const {
  auto dists = nlohmann::json::array();
  for (const auto& d : distributions) dists.push_back(d.to_json());
  auto prefs = nlohmann::json::array();
  for (const auto& p : preferences) prefs.push_back(p.to_json());
  return {{"schema_version", kPrepSchemaVersion},
          {"seed", seed},
          {"validation_edges", validation_edges},
          {"distributions", dists},
          {"preferences", prefs},
          {"text_samples", text_samples.to_json()}};
}

PrepStatistics PrepStatistics::from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kPrepSchemaVersion)
    throw UsageError("unsupported prep schema version");
  PrepStatistics p;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.validation_edges = j.at("validation_edges").get<std::size_t>();
  for (const auto& dj : j.at("distributions")) {
    DistributionDict d;
    const auto m = parse_metric(dj.at("metric").get<std::string>());
    if (!m) throw UsageError("unknown metric in prep document");
    d.metric = *m;
    d.polarity = dj.at("polarity").get<std::string>() == "positive" ? Polarity::positive
                                                                     : Polarity::negative;
    d.samples = dj.at("samples").get<std::size_t>();
    for (std::size_t i = 0; i < kBucketKeys.size(); ++i)
      d.buckets[i] = dj.at("buckets").at(std::string(kBucketKeys[i])).get<double>();
    p.distributions.push_back(d);
  }
  for (const auto& pj : j.at("preferences")) {
    PreferenceDict d;
    const auto scope = pj.at("scope").get<std::string>();
    d.scope = scope == "source" ? EldScope::source
              : scope == "destination" ? EldScope::destination
                                       : EldScope::pair;
    d.counted_samples = pj.at("counted_samples").get<std::size_t>();
    const auto& pr = pj.at("preferences");
    d.top1 = pr.at("top1").get<double>();
    d.top2 = pr.at("top2").get<double>();
    d.top3 = pr.at("top3").get<double>();
    d.others = pr.at("others").get<double>();
    p.preferences.push_back(d);
  }
  const auto& tj = j.at("text_samples");
  p.text_samples.count = tj.at("count").get<std::size_t>();
  p.text_samples.truncation = tj.at("truncation").get<std::size_t>();
  for (const auto& s : tj.at("samples"))
    p.text_samples.samples.push_back({s.at("src_text").get<std::string>(),
                                      s.at("dst_text").get<std::string>(),
                                      s.at("edge_text").get<std::string>(),
                                      s.at("label").get<std::string>(),
                                      s.value("negative_dst_text", std::string{})});
  return p;
}

PrepStatistics prepare_statistics(const SplitView& split, std::uint64_t seed, Direction direction,
                                  std::size_t text_count, std::size_t truncation) {
  const auto valid = split.valid();
  if (valid.empty()) throw UsageError("validation split is empty");
  std::vector<PairQuery> positives;
  positives.reserve(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i)
    positives.push_back({valid[i].src, valid[i].dst, valid[i].ts, split.train_end + i});
  const auto negatives = build_negative_validation_samples(split, seed);

  EvidenceOptions opts;
  opts.direction = direction;
  const auto pos_ev = batch_evidence(*split.store, positives, opts);
  const auto neg_ev = batch_evidence(*split.store, negatives, opts);

  PrepStatistics p;
  p.seed = seed;
  p.validation_edges = valid.size();
  for (Metric m : kMetrics) {
    auto [pos, neg] = metric_distribution(pos_ev, neg_ev, m);
    p.distributions.push_back(pos);
    p.distributions.push_back(neg);
  }
  for (EldScope scope : kScopes) {
    std::vector<PreferenceSample> samples;
    samples.reserve(pos_ev.size());
    for (std::size_t i = 0; i < pos_ev.size(); ++i) {
      const auto& e = pos_ev[i];
      const auto& history = scope == EldScope::source        ? e.eld_src
                            : scope == EldScope::destination ? e.eld_dst
                                                             : e.eld_pair;
      samples.push_back({history, valid[i].label});
    }
    p.preferences.push_back(eld_preference(samples, scope));
  }
  p.text_samples = sample_texts(split, text_count, truncation);
  const std::size_t n = valid.size();
  const std::size_t count = p.text_samples.samples.size();
  for (std::size_t i = 0; i < count; ++i)
    p.text_samples.samples[i].negative_dst_text =
        truncate_chars(split.store->node_text(negatives[i * n / count].dst), p.text_samples.truncation);
  return p;
}

}  // namespace dytag
