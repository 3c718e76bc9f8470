#include "dytag/recall.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace dytag {

CandidateSet default_recall(NodeId source, Timestamp t, std::span<const PairEvidence> pool) {
  CandidateSet set;
  set.source = source;
  set.t = t;
  for (const auto& e : pool) {
    if (e.hi > 0 || e.cn > 0)
      set.candidates.push_back({e.dst, e});
    else
      set.excluded.push_back({e.dst, std::nullopt});
  }
  return set;
}

CandidateSet default_recall(const DyTagStore& store, NodeId source, std::span<const NodeId> pool, Timestamp t,
                            Direction direction) {
  EvidenceOptions opts;
  opts.direction = direction;
  std::vector<PairEvidence> evidence;
  evidence.reserve(pool.size());
  for (NodeId v : pool) evidence.push_back(pair_evidence(store, {source, v, t, std::nullopt}, opts));
  return default_recall(source, t, evidence);
}

CandidateSet apply_thresholds(NodeId source, Timestamp t, std::span<const PairEvidence> pool,
                              std::span<const ThresholdRule> rules) {
  if (rules.empty()) return default_recall(source, t, pool);
  CandidateSet set;
  set.source = source;
  set.t = t;
  for (const auto& e : pool) {
    auto hit = std::find_if(rules.begin(), rules.end(), [&](const ThresholdRule& r) { return r.matches(e); });
    if (hit != rules.end())
      set.excluded.push_back({e.dst, *hit});
    else
      set.candidates.push_back({e.dst, e});
  }
  return set;
}

std::vector<RankKey> rank_keys(const GlobalLinkKnowledge* knowledge) {
  std::vector<RankKey> keys;
  if (knowledge) {
    for (auto level : {Significance::extremely_significant, Significance::helpful, Significance::maybe_related})
      for (Metric m : {Metric::hi, Metric::cn, Metric::dnf})
        if (const auto* mk = knowledge->metric(m); mk && mk->significance == level)
          keys.push_back({m, mk->favors == Favors::high});
  }
  if (keys.empty()) {
    if (knowledge) spdlog::warn("knowledge rates no structural metric as usable; ranking by HI");
    keys.push_back({Metric::hi, true});
  }
  return keys;
}

bool candidate_before(const Candidate& a, const Candidate& b, std::span<const RankKey> keys) {
  for (const auto& k : keys) {
    const double x = a.evidence.metric(k.metric);
    const double y = b.evidence.metric(k.metric);
    if (x != y) return k.descending ? x > y : x < y;
  }
  return a.node < b.node;
}

CandidateSet rank_candidates(CandidateSet set, std::span<const RankKey> keys) {
  std::sort(set.candidates.begin(), set.candidates.end(),
            [&](const Candidate& a, const Candidate& b) { return candidate_before(a, b, keys); });
  if (set.candidates.size() > set.cap) set.candidates.resize(set.cap);
  return set;
}

CandidateSet rank_candidates(CandidateSet set, const GlobalLinkKnowledge* knowledge) {
  const auto keys = rank_keys(knowledge);
  return rank_candidates(std::move(set), keys);
}

nlohmann::json recall_debug_json(const CandidateSet& ranked, const CandidateSet& unranked,
                                 std::span<const RankKey> keys) {
  auto key_list = nlohmann::json::array();
  for (const auto& k : keys)
    key_list.push_back(std::string(metric_key(k.metric)) + (k.descending ? " desc" : " asc"));
  auto order = nlohmann::json::array();
  for (std::size_t i = 0; i < ranked.candidates.size(); ++i) {
    const auto& c = ranked.candidates[i];
    order.push_back({{"position", i + 1},
                     {"node", c.node},
                     {"HI", c.evidence.hi},
                     {"CN", c.evidence.cn},
                     {"DNF", c.evidence.dst_activity.frequency}});
  }
  auto excluded = nlohmann::json::array();
  for (const auto& x : unranked.excluded)
    excluded.push_back({{"node", x.node}, {"rule", x.rule ? x.rule->describe() : "HI = 0 AND CN = 0 (default)"}});
  return {{"source", ranked.source},
          {"t", ranked.t},
          {"rank_keys", key_list},
          {"recalled", unranked.candidates.size()},
          {"cap", ranked.cap},
          {"order", order},
          {"excluded", excluded}};
}

}  // namespace dytag
