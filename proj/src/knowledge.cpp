#include "dytag/knowledge.hpp"

#include <fstream>
#include <sstream>

#include "dytag/error.hpp"

namespace dytag {

using nlohmann::json;

std::string_view significance_name(Significance s) {
  switch (s) {
    case Significance::extremely_significant: return "Extremely Significant";
    case Significance::helpful: return "Helpful";
    case Significance::maybe_related: return "Maybe Related";
    case Significance::not_relevant: return "Not Relevant";
  }
  return "?";
}

std::optional<Significance> parse_significance(std::string_view s) {
  for (auto v : {Significance::extremely_significant, Significance::helpful, Significance::maybe_related,
                 Significance::not_relevant})
    if (significance_name(v) == s) return v;
  return std::nullopt;
}

const MetricKnowledge* GlobalLinkKnowledge::metric(Metric m) const {
  auto it = metrics.find(m);
  return it == metrics.end() ? nullptr : &it->second;
}

bool ThresholdRule::matches(const PairEvidence& e) const {
  if (clauses.empty()) return false;
  if (combinator == Combinator::all) {
    for (const auto& c : clauses)
      if (!compare(e.metric(c.metric), c.op, c.value)) return false;
    return true;
  }
  for (const auto& c : clauses)
    if (compare(e.metric(c.metric), c.op, c.value)) return true;
  return false;
}

std::string ThresholdRule::describe() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    if (i) out << (combinator == Combinator::all ? " AND " : " OR ");
    out << metric_key(clauses[i].metric) << compare_op_symbol(clauses[i].op) << clauses[i].value;
  }
  return out.str();
}

const std::vector<ThresholdRule>& KnowledgeStore::rules_for(std::string_view task) const {
  static const std::vector<ThresholdRule> empty;
  auto it = thresholds.find(std::string(task));
  return it == thresholds.end() ? empty : it->second;
}

const ReflectionOutcome* KnowledgeStore::reflection_for(std::string_view task) const {
  auto it = reflection.find(std::string(task));
  return it == reflection.end() ? nullptr : &it->second;
}

const NodeProfile* KnowledgeStore::profile(NodeId n) const {
  auto it = local_profiles.find(n);
  return it == local_profiles.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Significance significance_from(const json& j) {
  const auto s = j.get<std::string>();
  auto v = parse_significance(s);
  if (!v) throw ConfigError("unknown significance level '" + s + "'");
  return *v;
}

json guidance_json(const GuidanceKnowledge& g) {
  return {{"significance", significance_name(g.significance)}, {"reason", g.reason}, {"guidance", g.guidance}};
}

GuidanceKnowledge guidance_from(const json& j) {
  return {significance_from(j.at("significance")), j.at("reason").get<std::string>(),
          j.at("guidance").get<std::string>()};
}

json rule_json(const ThresholdRule& r) {
  auto clauses = json::array();
  for (const auto& c : r.clauses)
    clauses.push_back({{"metric", metric_key(c.metric)}, {"op", compare_op_symbol(c.op)}, {"value", c.value}});
  return {{"combinator", r.combinator == Combinator::all ? "AND" : "OR"}, {"clauses", clauses}};
}

ThresholdRule rule_from(const json& j) {
  ThresholdRule r;
  const auto comb = j.at("combinator").get<std::string>();
  if (comb == "AND")
    r.combinator = Combinator::all;
  else if (comb == "OR")
    r.combinator = Combinator::any;
  else
    throw ConfigError("unknown threshold combinator '" + comb + "'");
  for (const auto& c : j.at("clauses")) {
    ThresholdClause clause;
    const auto metric = c.at("metric").get<std::string>();
    auto m = parse_metric(metric);
    if (!m) throw ConfigError("threshold rule references unavailable metric '" + metric + "'");
    const auto op = c.at("op").get<std::string>();
    auto o = parse_compare_op(op);
    if (!o) throw ConfigError("unknown threshold operator '" + op + "'");
    clause.metric = *m;
    clause.op = *o;
    clause.value = c.at("value").get<double>();
    r.clauses.push_back(clause);
  }
  if (r.clauses.empty()) throw ConfigError("threshold rule without clauses");
  return r;
}

}  // namespace

json KnowledgeStore::to_json() const {
  json j = json::object();
  j["schema_version"] = kKnowledgeSchemaVersion;
  if (dataset_card) {
    const auto& c = *dataset_card;
    j["dataset_card"] = {{"task_type", c.task_type},   {"graph_type", c.graph_type},
                         {"node_type", c.node_type},   {"node_text_type", c.node_text_type},
                         {"edge_type", c.edge_type},   {"edge_text_type", c.edge_text_type}};
  } else {
    j["dataset_card"] = nullptr;
  }
  if (global_link) {
    const auto& g = *global_link;
    json metrics = json::object();
    for (const auto& [m, k] : g.metrics)
      metrics[std::string(metric_key(m))] = {{"significance", significance_name(k.significance)},
                                             {"explanation", k.explanation},
                                             {"favors", k.favors == Favors::high ? "high" : "low"},
                                             {"positive_indicator", k.positive_indicator},
                                             {"negative_indicator", k.negative_indicator}};
    j["global_link"] = {{"text",
                         {{"significance", significance_name(g.text.significance)},
                          {"reason", g.text.reason},
                          {"explanation", g.text.explanation}}},
                        {"metrics", metrics},
                        {"overall_positive", g.overall_positive},
                        {"overall_negative", g.overall_negative},
                        {"overall_rules", g.overall_rules}};
  } else {
    j["global_link"] = nullptr;
  }
  if (global_edge_label) {
    j["global_edge_label"] = {{"node_text", guidance_json(global_edge_label->node_text)},
                              {"edge_text", guidance_json(global_edge_label->edge_text)},
                              {"eld", guidance_json(global_edge_label->eld)}};
  } else {
    j["global_edge_label"] = nullptr;
  }
  json th = json::object();
  for (const auto& [task, rules] : thresholds) {
    th[task] = json::array();
    for (const auto& r : rules) th[task].push_back(rule_json(r));
  }
  j["thresholds"] = th;
  json profiles = json::object();
  for (const auto& [id, p] : local_profiles)
    profiles[std::to_string(id)] = {{"node_description", p.node_description},
                                    {"neighbor_preference", p.neighbor_preference},
                                    {"edge_text_preference", p.edge_text_preference},
                                    {"edge_label_preference", p.edge_label_preference},
                                    {"structural_preference", p.structural_preference},
                                    {"explanation", p.explanation}};
  j["local_profiles"] = profiles;
  json refl = json::object();
  for (const auto& [task, r] : reflection)
    refl[task] = {{"significance", r.significant ? "Significant" : std::string(kNotSignificant)},
                  {"supplementation", r.supplementation}};
  j["reflection"] = refl;
  j["provenance"] = provenance;
  return j;
}

KnowledgeStore KnowledgeStore::from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kKnowledgeSchemaVersion)
      throw ConfigError("unsupported knowledge schema version");
    KnowledgeStore k;
    if (const auto& c = j.at("dataset_card"); !c.is_null())
      k.dataset_card = DatasetCard{c.at("task_type").get<std::string>(),  c.at("graph_type").get<std::string>(),
                                   c.at("node_type").get<std::string>(),  c.at("node_text_type").get<std::string>(),
                                   c.at("edge_type").get<std::string>(),  c.at("edge_text_type").get<std::string>()};
    if (const auto& g = j.at("global_link"); !g.is_null()) {
      GlobalLinkKnowledge gl;
      const auto& t = g.at("text");
      gl.text = {significance_from(t.at("significance")), t.at("reason").get<std::string>(),
                 t.at("explanation").get<std::string>()};
      for (const auto& [key, m] : g.at("metrics").items()) {
        auto metric = parse_metric(key);
        if (!metric) throw ConfigError("knowledge references unavailable metric '" + key + "'");
        MetricKnowledge mk;
        mk.significance = significance_from(m.at("significance"));
        mk.explanation = m.at("explanation").get<std::string>();
        const auto favors = m.at("favors").get<std::string>();
        if (favors != "high" && favors != "low") throw ConfigError("favors must be high or low");
        mk.favors = favors == "high" ? Favors::high : Favors::low;
        mk.positive_indicator = m.at("positive_indicator").get<std::string>();
        mk.negative_indicator = m.at("negative_indicator").get<std::string>();
        gl.metrics[*metric] = mk;
      }
      gl.overall_positive = g.at("overall_positive").get<std::string>();
      gl.overall_negative = g.at("overall_negative").get<std::string>();
      gl.overall_rules = g.at("overall_rules").get<std::string>();
      k.global_link = gl;
    }
    if (const auto& g = j.at("global_edge_label"); !g.is_null())
      k.global_edge_label = GlobalEdgeLabelKnowledge{guidance_from(g.at("node_text")),
                                                     guidance_from(g.at("edge_text")), guidance_from(g.at("eld"))};
    for (const auto& [task, rules] : j.at("thresholds").items())
      for (const auto& r : rules) k.thresholds[task].push_back(rule_from(r));
    for (const auto& [id, p] : j.at("local_profiles").items())
      k.local_profiles[static_cast<NodeId>(std::stoul(id))] =
          NodeProfile{p.at("node_description").get<std::string>(),     p.at("neighbor_preference").get<std::string>(),
                      p.at("edge_text_preference").get<std::string>(), p.at("edge_label_preference").get<std::string>(),
                      p.at("structural_preference").get<std::string>(), p.at("explanation").get<std::string>()};
    for (const auto& [task, r] : j.at("reflection").items()) {
      const auto sig = r.at("significance").get<std::string>();
      if (sig != "Significant" && sig != kNotSignificant)
        throw ConfigError("unknown reflection significance '" + sig + "'");
      k.reflection[task] = {sig == "Significant", r.at("supplementation").get<std::string>()};
    }
    k.provenance = j.at("provenance").get<std::map<std::string, std::vector<std::string>>>();
    return k;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed knowledge document: ") + e.what());
  }
}

std::string KnowledgeStore::serialize() const { return to_json().dump(2) + "\n"; }

void KnowledgeStore::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize();
}

KnowledgeStore KnowledgeStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read knowledge file " + path.string());
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": knowledge file is not valid JSON");
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Inclusion rules

namespace {

template <class Item, class Level>
std::vector<Item> select_items(const std::vector<std::pair<Item, Level>>& items) {
  std::vector<Item> strong, maybe;
  for (const auto& [item, level] : items) {
    if (level == Significance::extremely_significant || level == Significance::helpful)
      strong.push_back(item);
    else if (level == Significance::maybe_related)
      maybe.push_back(item);
  }
  return strong.empty() ? maybe : strong;
}

}  // namespace

std::vector<KnowledgeItem> included_link_items(const GlobalLinkKnowledge& k) {
  std::vector<std::pair<KnowledgeItem, Significance>> items{{KnowledgeItem::text, k.text.significance}};
  const std::pair<KnowledgeItem, Metric> metrics[] = {
      {KnowledgeItem::hi, Metric::hi}, {KnowledgeItem::cn, Metric::cn}, {KnowledgeItem::dnf, Metric::dnf}};
  for (const auto& [item, m] : metrics)
    if (const auto* mk = k.metric(m)) items.emplace_back(item, mk->significance);
  return select_items(items);
}

std::vector<EdgeLabelItem> included_edge_label_items(const GlobalEdgeLabelKnowledge& k, bool use_edge_text) {
  std::vector<std::pair<EdgeLabelItem, Significance>> items{{EdgeLabelItem::node_text, k.node_text.significance}};
  if (use_edge_text) items.emplace_back(EdgeLabelItem::edge_text, k.edge_text.significance);
  items.emplace_back(EdgeLabelItem::eld, k.eld.significance);
  return select_items(items);
}

}  // namespace dytag
