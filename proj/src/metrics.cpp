#include "dytag/metrics.hpp"

#include <algorithm>

#include "dytag/error.hpp"

namespace dytag {

// ---------------------------------------------------------------------------
// Metric names

std::string_view metric_key(Metric m) {
  switch (m) {
    case Metric::hi: return "HI";
    case Metric::cn: return "CN";
    case Metric::dnf: return "DNF";
  }
  return "?";
}

std::string_view metric_display_name(Metric m) {
  switch (m) {
    case Metric::hi: return "Historical Interaction";
    case Metric::cn: return "Common Neighbors";
    case Metric::dnf: return "Destination Node Frequency";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view s) {
  for (Metric m : {Metric::hi, Metric::cn, Metric::dnf})
    if (s == metric_key(m) || s == metric_display_name(m)) return m;
  return std::nullopt;
}

std::string_view eld_scope_name(EldScope s) {
  switch (s) {
    case EldScope::source: return "source";
    case EldScope::destination: return "destination";
    case EldScope::pair: return "pair";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// EdgeLabelDistribution

namespace {

void add_label(std::vector<LabelCount>& counts, LabelId label, std::uint64_t n = 1) {
  for (auto& c : counts)
    if (c.label == label) {
      c.count += n;
      return;
    }
  counts.push_back({label, n});
}

}  // namespace

void EdgeLabelDistribution::add(LabelId label, std::uint64_t n) { add_label(counts, label, n); }

std::uint64_t EdgeLabelDistribution::total() const {
  std::uint64_t sum = 0;
  for (const auto& c : counts) sum += c.count;
  return sum;
}

std::uint64_t EdgeLabelDistribution::count_of(LabelId label) const {
  for (const auto& c : counts)
    if (c.label == label) return c.count;
  return 0;
}

std::vector<LabelCount> EdgeLabelDistribution::ranked() const {
  std::vector<LabelCount> out = counts;
  std::stable_sort(out.begin(), out.end(),
                   [](const LabelCount& a, const LabelCount& b) { return a.count > b.count; });
  return out;
}

std::optional<LabelId> EdgeLabelDistribution::modal() const {
  if (counts.empty()) return std::nullopt;
  const LabelCount* best = &counts.front();
  for (const auto& c : counts)
    if (c.count > best->count) best = &c;
  return best->label;
}

double PairEvidence::metric(Metric m) const {
  switch (m) {
    case Metric::hi: return static_cast<double>(hi);
    case Metric::cn: return static_cast<double>(cn);
    case Metric::dnf: return static_cast<double>(dst_activity.frequency);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Per-query functions

namespace {

std::span<const EdgeIndex> prefix(const DyTagStore& store, std::span<const EdgeIndex> s, Timestamp t) {
  return s.first(store.count_before(s, t));
}

std::uint64_t frequency_before(const DyTagStore& store, NodeId n, Timestamp t) {
  return prefix(store, store.out_edges(n), t).size() + prefix(store, store.in_edges(n), t).size();
}

/// Edge indices between u and v before t, ascending.
std::vector<EdgeIndex> pair_edges(const DyTagStore& store, NodeId u, NodeId v, Timestamp t,
                                  Direction direction) {
  std::vector<EdgeIndex> out;
  if (!store.has_node(u) || !store.has_node(v)) return out;
  for (EdgeIndex i : prefix(store, store.out_edges(u), t))
    if (store.edge(i).dst == v) out.push_back(i);
  if (direction == Direction::undirected && u != v) {
    for (EdgeIndex i : prefix(store, store.in_edges(u), t))
      if (store.edge(i).src == v) out.push_back(i);
    std::sort(out.begin(), out.end());
  }
  return out;
}

std::optional<std::string> resolve_edge_text(const DyTagStore& store, const PairQuery& q) {
  if (q.edge) {
    const auto& e = store.edge(*q.edge);
    if (!e.text_id) return std::nullopt;
    return std::string(store.edge_text(e));
  }
  if (!store.has_node(q.src)) return std::nullopt;
  for (EdgeIndex i : store.out_edges(q.src)) {
    const auto& e = store.edge(i);
    if (e.ts == q.t && e.dst == q.dst && e.text_id) return std::string(store.edge_text(e));
  }
  return std::nullopt;
}

}  // namespace

std::uint64_t historical_interaction_count(const DyTagStore& store, NodeId u, NodeId v, Timestamp t,
                                           Direction direction) {
  return pair_edges(store, u, v, t, direction).size();
}

std::uint64_t common_neighbor_count(const DyTagStore& store, NodeId u, NodeId v, Timestamp t,
                                    Direction direction) {
  const auto a = neighbors_before(store, u, t, direction);
  const auto b = neighbors_before(store, v, t, direction);
  std::uint64_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

NodeActivity node_activity(const DyTagStore& store, NodeId n, Timestamp t, Direction direction) {
  NodeActivity a;
  if (!store.has_node(n)) return a;
  a.times_as_source = prefix(store, store.out_edges(n), t).size();
  a.times_as_destination = prefix(store, store.in_edges(n), t).size();
  a.frequency = a.times_as_source + a.times_as_destination;
  const auto neighbors = neighbors_before(store, n, t, direction);
  if (!neighbors.empty()) {
    std::uint64_t sum = 0;
    for (NodeId m : neighbors) sum += frequency_before(store, m, t);
    a.avg_neighbor_frequency = static_cast<double>(sum) / static_cast<double>(neighbors.size());
  }
  return a;
}

EdgeLabelDistribution node_label_distribution(const DyTagStore& store, NodeId n, Timestamp t,
                                              EldScope scope) {
  EdgeLabelDistribution d;
  d.scope = scope;
  d.cutoff = t;
  if (!store.has_node(n)) return d;
  const auto outs = prefix(store, store.out_edges(n), t);
  const auto ins = prefix(store, store.in_edges(n), t);
  // Merge by edge index so entries follow first occurrence.
  std::size_t i = 0, j = 0;
  while (i < outs.size() || j < ins.size()) {
    EdgeIndex next;
    if (j == ins.size() || (i < outs.size() && outs[i] <= ins[j]))
      next = outs[i++];
    else
      next = ins[j++];
    d.add(store.edge(next).label);
  }
  return d;
}

EdgeLabelDistribution pair_label_distribution(const DyTagStore& store, NodeId u, NodeId v,
                                              Timestamp t, Direction direction) {
  EdgeLabelDistribution d;
  d.scope = EldScope::pair;
  d.cutoff = t;
  for (EdgeIndex i : pair_edges(store, u, v, t, direction)) d.add(store.edge(i).label);
  return d;
}

PairEvidence pair_evidence(const DyTagStore& store, const PairQuery& q, const EvidenceOptions& opts) {
  PairEvidence e;
  e.src = q.src;
  e.dst = q.dst;
  e.t = q.t;
  e.hi = historical_interaction_count(store, q.src, q.dst, q.t, opts.direction);
  e.cn = common_neighbor_count(store, q.src, q.dst, q.t, opts.direction);
  e.src_activity = node_activity(store, q.src, q.t, opts.direction);
  e.dst_activity = node_activity(store, q.dst, q.t, opts.direction);
  e.eld_src = node_label_distribution(store, q.src, q.t, EldScope::source);
  e.eld_dst = node_label_distribution(store, q.dst, q.t, EldScope::destination);
  e.eld_pair = pair_label_distribution(store, q.src, q.dst, q.t, opts.direction);
  e.src_text = std::string(store.node_text(q.src));
  e.dst_text = std::string(store.node_text(q.dst));
  if (opts.include_edge_text) e.edge_text = resolve_edge_text(store, q);
  return e;
}

// ---------------------------------------------------------------------------
// EvidenceCursor

EvidenceCursor::EvidenceCursor(const DyTagStore& store, EvidenceOptions opts)
    : store_(&store), opts_(opts), nodes_(store.node_texts().bound()) {}

std::uint64_t EvidenceCursor::pair_key(NodeId u, NodeId v) const {
  if (opts_.direction == Direction::undirected && v < u) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

const EvidenceCursor::NodeState* EvidenceCursor::node(NodeId n) const {
  if (n >= nodes_.size() || !store_->has_node(n)) return nullptr;
  return &nodes_[n];
}

void EvidenceCursor::fold(const TemporalEdge& e) {
  auto& s = nodes_[e.src];
  auto& d = nodes_[e.dst];
  ++s.as_source;
  ++d.as_destination;
  add_label(s.labels, e.label);
  add_label(d.labels, e.label);
  s.neighbors.insert(e.dst);
  if (opts_.direction == Direction::undirected) d.neighbors.insert(e.src);
  auto& p = pairs_[pair_key(e.src, e.dst)];
  ++p.count;
  add_label(p.labels, e.label);
}

void EvidenceCursor::advance_to(Timestamp t) {
  if (started_ && t < cutoff_)
    throw UsageError("evidence cursor cannot move backwards in time");
  started_ = true;
  cutoff_ = t;
  const auto edges = store_->edges();
  while (next_ < edges.size() && edges[next_].ts < t) fold(edges[next_++]);
}

NodeActivity EvidenceCursor::activity(NodeId n) const {
  NodeActivity a;
  const auto* s = node(n);
  if (!s) return a;
  a.times_as_source = s->as_source;
  a.times_as_destination = s->as_destination;
  a.frequency = s->as_source + s->as_destination;
  if (!s->neighbors.empty()) {
    std::uint64_t sum = 0;
    for (NodeId m : s->neighbors) sum += nodes_[m].as_source + nodes_[m].as_destination;
    a.avg_neighbor_frequency = static_cast<double>(sum) / static_cast<double>(s->neighbors.size());
  }
  return a;
}

std::uint64_t EvidenceCursor::hi(NodeId u, NodeId v) const {
  if (!node(u) || !node(v)) return 0;
  auto it = pairs_.find(pair_key(u, v));
  return it == pairs_.end() ? 0 : it->second.count;
}

std::uint64_t EvidenceCursor::cn(NodeId u, NodeId v) const {
  const auto* a = node(u);
  const auto* b = node(v);
  if (!a || !b) return 0;
  if (b->neighbors.size() < a->neighbors.size()) std::swap(a, b);
  std::uint64_t n = 0;
  for (NodeId m : a->neighbors) n += b->neighbors.count(m);
  return n;
}

EdgeLabelDistribution EvidenceCursor::node_eld(NodeId n, EldScope scope) const {
  EdgeLabelDistribution d;
  d.scope = scope;
  d.cutoff = cutoff_;
  if (const auto* s = node(n)) d.counts = s->labels;
  return d;
}

EdgeLabelDistribution EvidenceCursor::pair_eld(NodeId u, NodeId v) const {
  EdgeLabelDistribution d;
  d.scope = EldScope::pair;
  d.cutoff = cutoff_;
  if (!node(u) || !node(v)) return d;
  auto it = pairs_.find(pair_key(u, v));
  if (it != pairs_.end()) d.counts = it->second.labels;
  return d;
}

PairEvidence EvidenceCursor::evidence(const PairQuery& q) const {
  if (!started_ || q.t != cutoff_)
    throw UsageError("evidence cursor queried at a time other than its cutoff");
  PairEvidence e;
  e.src = q.src;
  e.dst = q.dst;
  e.t = q.t;
  e.hi = hi(q.src, q.dst);
  e.cn = cn(q.src, q.dst);
  e.src_activity = activity(q.src);
  e.dst_activity = activity(q.dst);
  e.eld_src = node_eld(q.src, EldScope::source);
  e.eld_dst = node_eld(q.dst, EldScope::destination);
  e.eld_pair = pair_eld(q.src, q.dst);
  e.src_text = std::string(store_->node_text(q.src));
  e.dst_text = std::string(store_->node_text(q.dst));
  if (opts_.include_edge_text) e.edge_text = resolve_edge_text(*store_, q);
  return e;
}

std::vector<PairEvidence> batch_evidence(const DyTagStore& store, std::span<const PairQuery> queries,
                                         const EvidenceOptions& opts) {
  for (std::size_t i = 1; i < queries.size(); ++i)
    if (queries[i].t < queries[i - 1].t)
      throw UsageError("batch_evidence requires queries sorted by timestamp (query " +
                       std::to_string(i) + " is out of order)");
  std::vector<PairEvidence> out;
  out.reserve(queries.size());
  EvidenceCursor cursor(store, opts);
  for (const auto& q : queries) {
    cursor.advance_to(q.t);
    out.push_back(cursor.evidence(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const NodeActivity& a) {
  return {{"frequency", a.frequency},
          {"times_as_source", a.times_as_source},
          {"times_as_destination", a.times_as_destination},
          {"avg_neighbor_frequency", a.avg_neighbor_frequency}};
}

nlohmann::json to_json(const EdgeLabelDistribution& d, const DyTagStore* store) {
  auto arr = nlohmann::json::array();
  for (const auto& c : d.counts) {
    nlohmann::json entry{{"label", c.label}, {"count", c.count}};
    if (store) entry["text"] = std::string(store->label_text(c.label));
    arr.push_back(std::move(entry));
  }
  return arr;
}

nlohmann::json to_json(const PairEvidence& e, const DyTagStore* store) {
  nlohmann::json j{{"src", e.src},
                   {"dst", e.dst},
                   {"t", e.t},
                   {"hi", e.hi},
                   {"cn", e.cn},
                   {"src_activity", to_json(e.src_activity)},
                   {"dst_activity", to_json(e.dst_activity)},
                   {"eld_src", to_json(e.eld_src, store)},
                   {"eld_dst", to_json(e.eld_dst, store)},
                   {"eld_pair", to_json(e.eld_pair, store)},
                   {"src_text", e.src_text},
                   {"dst_text", e.dst_text}};
  if (e.edge_text) j["edge_text"] = *e.edge_text;
  return j;
}

}  // namespace dytag
