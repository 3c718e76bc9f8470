#include "dytag/agents.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "dytag/error.hpp"
#include "dytag/parallel.hpp"
#include "dytag/prompts.hpp"
#include "dytag/structured_output.hpp"

namespace dytag {

using nlohmann::ordered_json;

namespace {

Significance significance_field(const ordered_json& obj, const std::string& where,
                                const std::string& raw) {
  const auto s = obj.at("Significance").get<std::string>();
  auto v = parse_significance(s);
  if (!v) throw ParseError(where + ": unknown significance '" + s + "'", raw);
  return *v;
}

template <class T>
AgentResult<T> complete_or_throw(ChatGateway& gateway, ChatRequest request,
                                 const std::function<T(const std::string&)>& parse) {
  auto parsed = gateway.complete_parsed<T>(std::move(request), parse);
  if (!parsed.ok()) throw ParseError(parsed.error, parsed.raw);
  return {std::move(*parsed.value), std::move(parsed.digests)};
}

void append(std::vector<std::string>& into, const std::vector<std::string>& more) {
  into.insert(into.end(), more.begin(), more.end());
}

}  // namespace

std::string global_description(const DatasetCard& card) {
  return prompts::render("global_description", {{"graph_type", card.graph_type},
                                                {"node_type", card.node_type},
                                                {"node_text_type", card.node_text_type},
                                                {"edge_type", card.edge_type},
                                                {"edge_text_type", card.edge_text_type}});
}

// ---------------------------------------------------------------------------
// Initial agent

AgentResult<DatasetCard> run_initial_agent(std::string_view description, std::string_view task_name,
                                           ChatGateway& gateway) {
  if (description.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw UsageError("dataset description is empty");
  const Schema schema{"dataset card",
                      {{"task_type", JsonKind::string},
                       {"graph_type", JsonKind::string},
                       {"node_type", JsonKind::string},
                       {"node_text_type", JsonKind::string},
                       {"edge_type", JsonKind::string},
                       {"edge_text_type", JsonKind::string}}};
  auto request = gateway.make_request(
      prompts::render("initial_system", {}),
      prompts::render("initial_user", {{"task_name", std::string(task_name)},
                                       {"description", std::string(description)}}),
      "agent.initial");
  std::function<DatasetCard(const std::string&)> parse = [&](const std::string& raw) {
    const auto j = parse_structured(raw, schema);
    DatasetCard c{j["task_type"], j["graph_type"], j["node_type"],
                  j["node_text_type"], j["edge_type"], j["edge_text_type"]};
    for (const auto* f : {&c.task_type, &c.graph_type, &c.node_type, &c.node_text_type, &c.edge_type,
                          &c.edge_text_type})
      if (f->empty()) throw ParseError("dataset card has an empty field", raw);
    return c;
  };
  return complete_or_throw(gateway, std::move(request), parse);
}

// ---------------------------------------------------------------------------
// Global link summary

namespace {

struct StructureAnswer {
  std::map<Metric, MetricKnowledge> metrics;
  std::string overall_positive;
  std::string overall_negative;
  std::string report;
  std::optional<ThresholdRule> negative_rule;
};

constexpr std::pair<Metric, const char*> kStructureKeys[] = {
    {Metric::hi, "Historical Interaction"},
    {Metric::cn, "Common Neighbors"},
    {Metric::dnf, "Destination Node Frequency"}};

FieldSpec metric_spec(const char* key) {
  return {key,
          JsonKind::object,
          true,
          {{"Significance", JsonKind::string},
           {"Explanation", JsonKind::string},
           {"Favors", JsonKind::string},
           {"Positive Indicator", JsonKind::string},
           {"Negative Indicator", JsonKind::string}}};
}

std::optional<ThresholdRule> parse_negative_rule(const ordered_json& j, const std::string& raw) {
  if (!j.is_object()) throw ParseError("Negative Rule must be an object", raw);
  ThresholdRule rule;
  const auto comb = j.value("combinator", std::string{});
  if (comb == "AND")
    rule.combinator = Combinator::all;
  else if (comb == "OR")
    rule.combinator = Combinator::any;
  else
    throw ParseError("Negative Rule combinator must be AND or OR", raw);
  const auto clauses = j.value("clauses", ordered_json::array());
  if (!clauses.is_array()) throw ParseError("Negative Rule clauses must be a list", raw);
  for (const auto& c : clauses) {
    if (!c.is_object()) throw ParseError("Negative Rule clause must be an object", raw);
    const auto metric = parse_metric(c.value("metric", std::string{}));
    const auto op = parse_compare_op(c.value("op", std::string{}));
    if (!metric || !op || !c.contains("value") || !c["value"].is_number() ||
        !std::isfinite(c["value"].get<double>()))
      throw ParseError("Negative Rule clause needs metric HI/CN/DNF, an operator and a finite value", raw);
    rule.clauses.push_back({*metric, *op, c["value"].get<double>()});
  }
  if (rule.clauses.empty()) return std::nullopt;
  return rule;
}

StructureAnswer parse_structure_answer(const std::string& raw) {
  Schema schema{"structure agent", {}};
  for (const auto& [m, key] : kStructureKeys) schema.fields.push_back(metric_spec(key));
  schema.fields.push_back({"Overall Indicators",
                           JsonKind::object,
                           true,
                           {{"Positive Indicator", JsonKind::string},
                            {"Negative Indicator", JsonKind::string},
                            {"Negative Rule", JsonKind::object, false, {}}}});
  schema.fields.push_back({"Structure Rules and Report", JsonKind::string});
  const auto j = parse_structured(raw, schema);
  StructureAnswer out;
  for (const auto& [m, key] : kStructureKeys) {
    const auto& e = j[key];
    MetricKnowledge mk;
    mk.significance = significance_field(e, key, raw);
    mk.explanation = e["Explanation"];
    const std::string favors = e["Favors"];
    if (favors != "high" && favors != "low")
      throw ParseError(std::string(key) + ": Favors must be 'high' or 'low'", raw);
    mk.favors = favors == "high" ? Favors::high : Favors::low;
    mk.positive_indicator = e["Positive Indicator"];
    mk.negative_indicator = e["Negative Indicator"];
    out.metrics[m] = mk;
  }
  const auto& overall = j["Overall Indicators"];
  out.overall_positive = overall["Positive Indicator"];
  out.overall_negative = overall["Negative Indicator"];
  if (overall.contains("Negative Rule")) out.negative_rule = parse_negative_rule(overall["Negative Rule"], raw);
  out.report = j["Structure Rules and Report"];
  return out;
}

TextKnowledge parse_text_answer(const std::string& raw) {
  const Schema schema{"text agent",
                      {{"Significance", JsonKind::string},
                       {"Reason", JsonKind::string},
                       {"Explanation", JsonKind::string}}};
  const auto j = parse_structured(raw, schema);
  return {significance_field(j, "text agent", raw), j["Reason"], j["Explanation"]};
}

std::string bucket_json(const DistributionDict& d) {
  ordered_json j = ordered_json::object();
  for (std::size_t i = 0; i < kBucketKeys.size(); ++i) j[std::string(kBucketKeys[i])] = d.buckets[i];
  return j.dump();
}

std::string link_text_samples(const TextSampleSet& set) {
  std::string pos = "Positive samples (source node text | destination node text):\n";
  std::string neg = "Negative samples (source node text | destination node text):\n";
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto& s = set.samples[i];
    pos += fmt::format("{}. {} | {}\n", i + 1, s.src_text, s.dst_text);
    neg += fmt::format("{}. {} | {}\n", i + 1, s.src_text, s.negative_dst_text);
  }
  return pos + "\n" + neg;
}

}  // namespace

GlobalLinkResult run_global_link_summary(const PrepStatistics& prep, const DatasetCard& card,
                                         ChatGateway& gateway) {
  const auto gd = global_description(card);
  GlobalLinkResult result;

  auto structure_request = gateway.make_request(
      prompts::render("structure_agent_system", {{"global_description", gd}}),
      prompts::render("structure_agent_user",
                      {{"pos_hi", bucket_json(prep.distribution(Metric::hi, Polarity::positive))},
                       {"pos_cn", bucket_json(prep.distribution(Metric::cn, Polarity::positive))},
                       {"pos_dnf", bucket_json(prep.distribution(Metric::dnf, Polarity::positive))},
                       {"neg_hi", bucket_json(prep.distribution(Metric::hi, Polarity::negative))},
                       {"neg_cn", bucket_json(prep.distribution(Metric::cn, Polarity::negative))},
                       {"neg_dnf", bucket_json(prep.distribution(Metric::dnf, Polarity::negative))},
                       {"output_format", prompts::template_text("output_structure_agent")}}),
      "agent.structure");
  std::function<StructureAnswer(const std::string&)> parse_structure = parse_structure_answer;
  auto structure = complete_or_throw(gateway, std::move(structure_request), parse_structure);
  append(result.digests, structure.digests);

  auto text_request = gateway.make_request(
      prompts::render("text_agent_system", {{"global_description", gd}}),
      prompts::render("text_agent_user",
                      {{"text_samples", link_text_samples(prep.text_samples)},
                       {"output_format", prompts::template_text("output_text_agent")}}),
      "agent.text");
  std::function<TextKnowledge(const std::string&)> parse_text = parse_text_answer;
  auto text = complete_or_throw(gateway, std::move(text_request), parse_text);
  append(result.digests, text.digests);

  auto& k = result.knowledge;
  k.text = text.value;
  k.metrics = structure.value.metrics;
  k.overall_positive = structure.value.overall_positive;
  k.overall_negative = structure.value.overall_negative;
  k.overall_rules = structure.value.report;

  if (const auto& rule = structure.value.negative_rule) {
    const bool uses_irrelevant = std::any_of(rule->clauses.begin(), rule->clauses.end(), [&](const auto& c) {
      const auto* mk = k.metric(c.metric);
      return !mk || mk->significance == Significance::not_relevant;
    });
    if (uses_irrelevant)
      spdlog::info("dropping negative rule '{}': it references a metric rated Not Relevant", rule->describe());
    else
      result.thresholds.push_back(*rule);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Global edge label summary

namespace {

GuidanceKnowledge guidance_from(const ordered_json& j, const std::string& where, const std::string& raw) {
  return {significance_field(j, where, raw), j["Reason"], j["Guidance"]};
}

std::vector<FieldSpec> guidance_fields() {
  return {{"Significance", JsonKind::string}, {"Reason", JsonKind::string}, {"Guidance", JsonKind::string}};
}

std::string preference_json(const PreferenceDict& p) {
  ordered_json j = ordered_json::object();
  j["top1"] = p.top1;
  j["top2"] = p.top2;
  j["top3"] = p.top3;
  j["others"] = p.others;
  j["counted_samples"] = p.counted_samples;
  return j.dump();
}

std::string edge_text_samples(const TextSampleSet& set) {
  std::string out = "Samples (source node text | destination node text | edge text | edge label):\n";
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto& s = set.samples[i];
    out += fmt::format("{}. {} | {} | {} | {}\n", i + 1, s.src_text, s.dst_text, s.edge_text, s.label_text);
  }
  return out;
}

}  // namespace

AgentResult<GlobalEdgeLabelKnowledge> run_global_edge_label_summary(const PrepStatistics& prep,
                                                                    const DatasetCard& card,
                                                                    ChatGateway& gateway) {
  const auto gd = global_description(card);
  AgentResult<GlobalEdgeLabelKnowledge> result;

  auto text_request = gateway.make_request(
      prompts::render("edge_text_agent_system", {{"global_description", gd}}),
      prompts::render("edge_text_agent_user",
                      {{"text_samples", edge_text_samples(prep.text_samples)},
                       {"output_format", prompts::template_text("output_edge_text_agent")}}),
      "agent.edge_text");
  using TextPair = std::pair<GuidanceKnowledge, GuidanceKnowledge>;
  std::function<TextPair(const std::string&)> parse_text = [](const std::string& raw) {
    const Schema schema{"edge text agent",
                        {{"Node Text", JsonKind::object, true, guidance_fields()},
                         {"Edge Text", JsonKind::object, true, guidance_fields()}}};
    const auto j = parse_structured(raw, schema);
    return TextPair{guidance_from(j["Node Text"], "Node Text", raw), guidance_from(j["Edge Text"], "Edge Text", raw)};
  };
  auto texts = complete_or_throw(gateway, std::move(text_request), parse_text);
  append(result.digests, texts.digests);

  auto eld_request = gateway.make_request(
      prompts::render("eld_agent_system", {{"global_description", gd}}),
      prompts::render("eld_agent_user",
                      {{"src_pref", preference_json(prep.preference(EldScope::source))},
                       {"dst_pref", preference_json(prep.preference(EldScope::destination))},
                       {"pair_pref", preference_json(prep.preference(EldScope::pair))},
                       {"output_format", prompts::template_text("output_eld_agent")}}),
      "agent.eld");
  std::function<GuidanceKnowledge(const std::string&)> parse_eld = [](const std::string& raw) {
    const Schema schema{"edge label distribution agent", guidance_fields()};
    return guidance_from(parse_structured(raw, schema), "edge label distribution agent", raw);
  };
  auto eld = complete_or_throw(gateway, std::move(eld_request), parse_eld);
  append(result.digests, eld.digests);

  result.value = {texts.value.first, texts.value.second, eld.value};
  return result;
}

// ---------------------------------------------------------------------------
// Local summary

namespace {

std::size_t prefix_below(std::span<const EdgeIndex> incidence, std::size_t end) {
  return static_cast<std::size_t>(std::lower_bound(incidence.begin(), incidence.end(), end) -
                                  incidence.begin());
}

std::uint64_t frequency_within(const DyTagStore& store, NodeId n, std::size_t end) {
  return prefix_below(store.out_edges(n), end) + prefix_below(store.in_edges(n), end);
}

}  // namespace

std::vector<NodeId> select_active_nodes(const SplitView& split, double fraction) {
  if (!(fraction > 0) || fraction > 1) throw UsageError("active-node fraction must be in (0, 1]");
  std::vector<std::pair<NodeId, std::uint64_t>> active;
  for (NodeId n : split.store->node_ids())
    if (const auto f = frequency_within(*split.store, n, split.valid_end); f > 0) active.emplace_back(n, f);
  std::sort(active.begin(), active.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  // Guard against 0.1 * 30 == 3.0000000000000004 rounding up.
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(active.size()) - 1e-9));
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < keep && i < active.size(); ++i) out.push_back(active[i].first);
  return out;
}

LocalEvidence local_evidence(const SplitView& split, NodeId node, std::size_t cap, std::size_t truncation) {
  const auto& store = *split.store;
  const std::size_t end = split.valid_end;
  LocalEvidence ev;
  ev.node = node;
  ev.node_text = truncate_chars(store.node_text(node), truncation);
  ev.labels.cutoff = end < store.num_edges() ? store.edge(end).ts : store.edges().back().ts;

  const auto out = store.out_edges(node).first(prefix_below(store.out_edges(node), end));
  const auto in = store.in_edges(node).first(prefix_below(store.in_edges(node), end));
  std::vector<EdgeIndex> merged;
  std::merge(out.begin(), out.end(), in.begin(), in.end(), std::back_inserter(merged));

  ev.activity.times_as_source = out.size();
  ev.activity.times_as_destination = in.size();
  ev.activity.frequency = out.size() + in.size();
  std::vector<NodeId> neighbors;
  for (EdgeIndex i : merged) {
    const auto& e = store.edge(i);
    ev.labels.add(e.label);
    neighbors.push_back(e.src == node ? e.dst : e.src);
  }
  std::sort(neighbors.begin(), neighbors.end());
  neighbors.erase(std::unique(neighbors.begin(), neighbors.end()), neighbors.end());
  ev.neighbor_count = neighbors.size();
  if (!neighbors.empty()) {
    double sum = 0;
    for (NodeId v : neighbors) sum += static_cast<double>(frequency_within(store, v, end));
    ev.activity.avg_neighbor_frequency = sum / static_cast<double>(neighbors.size());
  }

  // A self-loop appears in both incidence lists; describe it once.
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  for (auto it = merged.rbegin(); it != merged.rend() && ev.interactions.size() < cap; ++it) {
    const auto& e = store.edge(*it);
    const bool outgoing = e.src == node;
    const NodeId other = outgoing ? e.dst : e.src;
    ev.interactions.push_back(fmt::format("{} node {} ({}) | Edge text: {} | Edge label: {}",
                                          outgoing ? "To" : "From", other,
                                          truncate_chars(store.node_text(other), truncation),
                                          truncate_chars(store.edge_text(e), truncation),
                                          store.label_text(e.label)));
  }
  return ev;
}

std::optional<AgentResult<NodeProfile>> run_local_summary(const LocalEvidence& ev, const DyTagStore& store,
                                                          const DatasetCard& card, ChatGateway& gateway) {
  const auto gd = global_description(card);
  std::string samples = "Node text: " + ev.node_text + "\nRecent interactions (most recent first):\n";
  for (std::size_t i = 0; i < ev.interactions.size(); ++i)
    samples += fmt::format("{}. {}\n", i + 1, ev.interactions[i]);
  ordered_json dist = ordered_json::object();
  for (const auto& lc : ev.labels.ranked()) dist[std::string(store.label_text(lc.label))] = lc.count;

  AgentResult<NodeProfile> result;
  auto text_request = gateway.make_request(
      prompts::render("local_text_system", {{"global_description", gd}}),
      prompts::render("local_text_user",
                      {{"text_samples", samples},
                       {"edge_label_explanation", "Edge label distribution of the node: " + dist.dump()},
                       {"output_format", prompts::template_text("output_local_text")}}),
      "agent.local_text");
  std::function<NodeProfile(const std::string&)> parse_text = [](const std::string& raw) {
    const Schema schema{"local text agent",
                        {{"Node Description", JsonKind::string},
                         {"Neighbor Preference", JsonKind::string},
                         {"Edge Text Preference", JsonKind::string},
                         {"Edge Label Preference", JsonKind::string},
                         {"Explanation", JsonKind::string}}};
    const auto j = parse_structured(raw, schema);
    NodeProfile p;
    p.node_description = j["Node Description"];
    if (p.node_description.empty()) throw ParseError("Node Description is empty", raw);
    p.neighbor_preference = j["Neighbor Preference"];
    p.edge_text_preference = j["Edge Text Preference"];
    p.edge_label_preference = j["Edge Label Preference"];
    p.explanation = j["Explanation"];
    return p;
  };
  auto text = gateway.complete_parsed(std::move(text_request), parse_text);
  append(result.digests, text.digests);
  if (!text.ok()) {
    spdlog::warn("local summary for node {} omitted: {}", ev.node, text.error);
    return std::nullopt;
  }

  auto structure_request = gateway.make_request(
      prompts::render("local_structure_system", {{"global_description", gd}}),
      prompts::render("local_structure_user",
                      {{"node_id", std::to_string(ev.node)},
                       {"frequency", std::to_string(ev.activity.frequency)},
                       {"as_source", std::to_string(ev.activity.times_as_source)},
                       {"as_destination", std::to_string(ev.activity.times_as_destination)},
                       {"avg_neighbor_frequency", fmt::format("{:.2f}", ev.activity.avg_neighbor_frequency)},
                       {"neighbor_count", std::to_string(ev.neighbor_count)},
                       {"output_format", prompts::template_text("output_local_structure")}}),
      "agent.local_structure");
  std::function<std::string(const std::string&)> parse_structure = [](const std::string& raw) {
    const Schema schema{"local structure agent", {{"Structural Preference", JsonKind::string}}};
    std::string pref = parse_structured(raw, schema)["Structural Preference"];
    if (pref.empty()) throw ParseError("Structural Preference is empty", raw);
    return pref;
  };
  auto structure = gateway.complete_parsed(std::move(structure_request), parse_structure);
  append(result.digests, structure.digests);
  if (!structure.ok()) {
    spdlog::warn("local summary for node {} omitted: {}", ev.node, structure.error);
    return std::nullopt;
  }
  result.value = std::move(*text.value);
  result.value.structural_preference = std::move(*structure.value);
  return result;
}

std::map<NodeId, AgentResult<NodeProfile>> run_local_summaries(const SplitView& split,
                                                              const std::vector<NodeId>& nodes,
                                                              const DatasetCard& card, ChatGateway& gateway,
                                                              std::size_t workers) {
  std::vector<std::optional<AgentResult<NodeProfile>>> results(nodes.size());
  parallel_for(nodes.size(), workers, [&](std::size_t i) {
    results[i] = run_local_summary(local_evidence(split, nodes[i]), *split.store, card, gateway);
  });
  std::map<NodeId, AgentResult<NodeProfile>> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (results[i]) out.emplace(nodes[i], std::move(*results[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Knowledge rendering

std::string describe_link_knowledge(const GlobalLinkKnowledge& k) {
  std::string out;
  bool numeric = false;
  for (const auto item : included_link_items(k)) {
    if (item == KnowledgeItem::text) {
      out += fmt::format("- Node text ({}): {} {}\n", significance_name(k.text.significance), k.text.reason,
                         k.text.explanation);
      continue;
    }
    const Metric m = item == KnowledgeItem::hi ? Metric::hi : item == KnowledgeItem::cn ? Metric::cn : Metric::dnf;
    const auto& mk = *k.metric(m);
    numeric = true;
    out += fmt::format("- {} ({}; {} values favor a link): {} Positive indicator: {}. Negative indicator: {}.\n",
                       metric_display_name(m), significance_name(mk.significance),
                       mk.favors == Favors::high ? "higher" : "lower", mk.explanation, mk.positive_indicator,
                       mk.negative_indicator);
  }
  if (numeric) {
    out += "- Overall positive indicator: " + k.overall_positive + "\n";
    out += "- Overall negative indicator: " + k.overall_negative + "\n";
    if (!k.overall_rules.empty()) out += "- Structure rules: " + k.overall_rules + "\n";
  }
  return out;
}

std::string describe_edge_label_knowledge(const GlobalEdgeLabelKnowledge& k, bool use_edge_text) {
  std::string out;
  for (const auto item : included_edge_label_items(k, use_edge_text)) {
    const auto& [name, g] = item == EdgeLabelItem::node_text   ? std::pair{"Node text", &k.node_text}
                            : item == EdgeLabelItem::edge_text ? std::pair{"Edge text", &k.edge_text}
                                                               : std::pair{"Historical edge labels", &k.eld};
    out += fmt::format("- {} ({}): {}\n", name, significance_name(g->significance), g->guidance);
  }
  return out;
}

std::string describe_profile(const NodeProfile& p) {
  std::string out;
  auto line = [&](const char* key, const std::string& value) {
    if (value.empty() || value == kNotSignificant) return;
    out += fmt::format("- {}: {}\n", key, value);
  };
  line("Node Description", p.node_description);
  line("Neighbor Preference", p.neighbor_preference);
  line("Edge Text Preference", p.edge_text_preference);
  line("Edge Label Preference", p.edge_label_preference);
  line("Structural Preference", p.structural_preference);
  return out;
}

}  // namespace dytag
