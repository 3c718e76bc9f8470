#include "dytag/prediction.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_set>

#include "dytag/agents.hpp"
#include "dytag/error.hpp"
#include "dytag/parallel.hpp"
#include "dytag/prompts.hpp"
#include "dytag/stats_prep.hpp"
#include "dytag/structured_output.hpp"

namespace dytag {

using nlohmann::ordered_json;

std::string_view task_name(Task t) {
  switch (t) {
    case Task::lp: return "lp";
    case Task::nr: return "nr";
    case Task::ec: return "ec";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view s) {
  for (Task t : {Task::lp, Task::nr, Task::ec})
    if (task_name(t) == s) return t;
  return std::nullopt;
}

std::string_view mode_name(PromptMode m) {
  switch (m) {
    case PromptMode::text: return "text";
    case PromptMode::text_fewshot: return "text-fewshot";
    case PromptMode::structure: return "structure";
    case PromptMode::structure_fewshot: return "structure-fewshot";
    case PromptMode::gad: return "gad";
  }
  return "?";
}

std::optional<PromptMode> parse_mode(std::string_view s) {
  for (auto m : {PromptMode::text, PromptMode::text_fewshot, PromptMode::structure, PromptMode::structure_fewshot,
                 PromptMode::gad})
    if (mode_name(m) == s) return m;
  return std::nullopt;
}

bool is_few_shot(PromptMode m) { return m == PromptMode::text_fewshot || m == PromptMode::structure_fewshot; }

DatasetCard default_dataset_card() {
  return {"link prediction", "dynamic text-attributed", "entities", "the name or description of the entity",
          "timestamped interaction", "the content of the interaction"};
}

// ---------------------------------------------------------------------------
// Prompt assembly

namespace {

bool text_mode(PromptMode m) { return m == PromptMode::text || m == PromptMode::text_fewshot; }

struct LinkPlan {
  bool text = false;
  bool hi = false;
  bool cn = false;
  bool metrics = false;
};

LinkPlan link_plan(const PromptContext& ctx) {
  if (text_mode(ctx.mode)) return {true, false, false, false};
  if (ctx.mode != PromptMode::gad) return {true, true, true, true};
  LinkPlan p;
  for (auto item : included_link_items(*ctx.knowledge->global_link)) {
    p.text |= item == KnowledgeItem::text;
    p.hi |= item == KnowledgeItem::hi;
    p.cn |= item == KnowledgeItem::cn;
    p.metrics |= item == KnowledgeItem::dnf;
  }
  return p;
}

struct EcPlan {
  bool node_text = false;
  bool prefs = false;
  bool edge_text = false;
};

EcPlan ec_plan(const PromptContext& ctx) {
  if (text_mode(ctx.mode)) return {true, false, ctx.use_edge_text};
  if (ctx.mode != PromptMode::gad) return {true, true, ctx.use_edge_text};
  EcPlan p;
  for (auto item : included_edge_label_items(*ctx.knowledge->global_edge_label, ctx.use_edge_text)) {
    p.node_text |= item == EdgeLabelItem::node_text;
    p.prefs |= item == EdgeLabelItem::eld;
    p.edge_text |= item == EdgeLabelItem::edge_text;
  }
  return p;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string guides(const std::vector<std::string>& names) {
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < names.size(); ++i)
    parts.push_back(prompts::render(names[i], {{"index", std::to_string(i + 1)}}));
  return join(parts, "\n");
}

std::string link_guide(const LinkPlan& p) {
  std::vector<std::string> names;
  if (p.text) names.push_back("guide_node_text");
  if (p.hi) names.push_back("guide_hi");
  if (p.cn) names.push_back("guide_cn");
  if (p.metrics) names.push_back("guide_node_metrics");
  return guides(names);
}

std::string ec_guide(const EcPlan& p) {
  std::vector<std::string> names;
  if (p.node_text) names.push_back("guide_ec_node_text");
  if (p.prefs) {
    names.push_back("guide_ec_node_pref");
    names.push_back("guide_ec_pair_pref");
  }
  if (p.edge_text) names.push_back("guide_ec_edge_text");
  return guides(names);
}

std::string fmt2(double v) { return fmt::format("{:.2f}", v); }

std::string metric_blocks(const PairEvidence& e, const LinkPlan& p) {
  std::vector<std::string> parts;
  const auto src = std::to_string(e.src);
  const auto dst = std::to_string(e.dst);
  if (p.hi)
    parts.push_back(prompts::render("sample_hi", {{"src_id", src}, {"dst_id", dst}, {"hi", std::to_string(e.hi)}}));
  if (p.cn)
    parts.push_back(prompts::render("sample_cn", {{"src_id", src}, {"dst_id", dst}, {"cn", std::to_string(e.cn)}}));
  if (p.metrics)
    parts.push_back(prompts::render(
        "sample_node_metrics",
        {{"src_id", src},
         {"dst_id", dst},
         {"src_frequency", std::to_string(e.src_activity.frequency)},
         {"src_as_source", std::to_string(e.src_activity.times_as_source)},
         {"src_as_destination", std::to_string(e.src_activity.times_as_destination)},
         {"src_avg_neighbor_frequency", fmt2(e.src_activity.avg_neighbor_frequency)},
         {"dst_frequency", std::to_string(e.dst_activity.frequency)},
         {"dst_as_source", std::to_string(e.dst_activity.times_as_source)},
         {"dst_as_destination", std::to_string(e.dst_activity.times_as_destination)},
         {"dst_avg_neighbor_frequency", fmt2(e.dst_activity.avg_neighbor_frequency)}}));
  return join(parts, "\n");
}

std::string lp_blocks(const PairEvidence& e, const LinkPlan& p) {
  std::vector<std::string> parts;
  if (p.text) parts.push_back(prompts::render("sample_node_text", {{"src_text", e.src_text}, {"dst_text", e.dst_text}}));
  if (auto m = metric_blocks(e, p); !m.empty()) parts.push_back(std::move(m));
  return join(parts, "\n");
}

std::string eld_json(const EdgeLabelDistribution& d, const DyTagStore& store) {
  ordered_json j = ordered_json::object();
  for (const auto& lc : d.ranked()) j[std::string(store.label_text(lc.label))] = lc.count;
  return j.dump();
}

std::string ec_blocks(const PairEvidence& e, const EcPlan& p, const DyTagStore& store) {
  std::vector<std::string> parts;
  const auto src = std::to_string(e.src);
  const auto dst = std::to_string(e.dst);
  if (p.node_text)
    parts.push_back(prompts::render("sample_ec_node_text", {{"src_text", e.src_text}, {"dst_text", e.dst_text}}));
  if (p.prefs) {
    parts.push_back(prompts::render("sample_ec_node_pref", {{"src_id", src},
                                                            {"dst_id", dst},
                                                            {"eld_src", eld_json(e.eld_src, store)},
                                                            {"eld_dst", eld_json(e.eld_dst, store)}}));
    parts.push_back(prompts::render("sample_ec_pair_pref",
                                    {{"src_id", src}, {"dst_id", dst}, {"eld_pair", eld_json(e.eld_pair, store)}}));
  }
  if (p.edge_text) parts.push_back(prompts::render("sample_ec_edge_text", {{"edge_text", e.edge_text.value_or("")}}));
  return join(parts, "\n");
}

std::string profile_block(const PromptContext& ctx, std::string_view role, NodeId n) {
  if (ctx.mode != PromptMode::gad) return {};
  const auto* p = ctx.knowledge->profile(n);
  if (!p) return {};
  auto text = describe_profile(*p);
  if (text.empty()) return {};
  if (text.back() == '\n') text.pop_back();
  return prompts::render("sample_local_profile",
                         {{"role", std::string(role)}, {"node_id", std::to_string(n)}, {"profile", text}});
}

void append_block(std::string& blocks, const std::string& block) {
  if (block.empty()) return;
  if (!blocks.empty()) blocks += "\n";
  blocks += block;
}

std::string knowledge_section(const PromptContext& ctx, Task task) {
  if (ctx.mode != PromptMode::gad) return {};
  const auto& k = *ctx.knowledge;
  const auto summary = task == Task::ec ? describe_edge_label_knowledge(*k.global_edge_label, ctx.use_edge_text)
                                        : describe_link_knowledge(*k.global_link);
  auto out = prompts::render("gad_global_summary", {{"summary", summary}});
  if (task != Task::ec && ctx.include_reflection)
    if (const auto* r = k.reflection_for("LP"); r && r->significant)
      out += prompts::render("gad_reflection", {{"supplementation", r->supplementation}});
  return out;
}

std::string examples_text(const PromptContext& ctx) {
  std::string out;
  for (std::size_t i = 0; i < ctx.examples.size(); ++i)
    out += prompts::render("example_item", {{"number", std::to_string(i + 1)},
                                            {"blocks", ctx.examples[i].blocks},
                                            {"answer", ctx.examples[i].answer}});
  return out;
}

void require_context(const PromptContext& ctx, Task task) {
  if (!ctx.store) throw UsageError("prompt context has no store");
  if (ctx.mode == PromptMode::gad) {
    if (!ctx.knowledge) throw UsageError("GAD mode requires generated knowledge");
    if (task == Task::ec && !ctx.knowledge->global_edge_label)
      throw UsageError("GAD edge classification requires global edge label knowledge");
    if (task != Task::ec && !ctx.knowledge->global_link)
      throw UsageError("GAD link tasks require global link knowledge");
  }
}

std::string nr_source_blocks(NodeId source, std::string_view source_text, const LinkPlan& p,
                             const PromptContext& ctx) {
  std::string blocks;
  if (p.text) blocks = prompts::render("sample_source_text", {{"src_text", std::string(source_text)}});
  append_block(blocks, profile_block(ctx, "Source", source));
  return blocks;
}

std::string nr_candidate_blocks(const PairEvidence& e, const LinkPlan& p) {
  std::string blocks;
  if (p.text) blocks = prompts::render("sample_dst_text", {{"dst_text", e.dst_text}});
  append_block(blocks, metric_blocks(e, p));
  return prompts::render("sample_nr_candidate", {{"dst_id", std::to_string(e.dst)}, {"blocks", blocks}});
}

std::string nr_candidates(std::span<const PairEvidence* const> evidence, const LinkPlan& p) {
  std::vector<std::string> parts;
  for (const auto* e : evidence) parts.push_back(nr_candidate_blocks(*e, p));
  return join(parts, "\n");
}

std::string fewshot_clause(const PromptContext& ctx) {
  return is_few_shot(ctx.mode) ? " and the examples provided" : "";
}

}  // namespace

Prompt assemble_lp_prompt(const PairEvidence& e, const PromptContext& ctx) {
  require_context(ctx, Task::lp);
  const auto plan = link_plan(ctx);
  std::string blocks = lp_blocks(e, plan);
  append_block(blocks, profile_block(ctx, "Source", e.src));
  append_block(blocks, profile_block(ctx, "Destination", e.dst));
  Prompt p;
  p.system = prompts::render("predictor_lp_system", {{"global_description", global_description(ctx.card)},
                                                     {"fewshot_clause", fewshot_clause(ctx)},
                                                     {"guide", link_guide(plan)},
                                                     {"knowledge", knowledge_section(ctx, Task::lp)},
                                                     {"task_system", prompts::render("task_lp_system", {})}});
  p.user = prompts::render(
      "predictor_lp_user",
      {{"examples", examples_text(ctx)},
       {"blocks", blocks},
       {"task_user",
        prompts::render("task_lp_user", {{"src_id", std::to_string(e.src)}, {"dst_id", std::to_string(e.dst)}})}});
  return p;
}

Prompt assemble_nr_prompt(NodeId source, std::string_view source_text, std::span<const Candidate> candidates,
                          const PromptContext& ctx) {
  require_context(ctx, Task::nr);
  const auto plan = link_plan(ctx);
  std::vector<const PairEvidence*> evidence;
  for (const auto& c : candidates) evidence.push_back(&c.evidence);
  Prompt p;
  p.system = prompts::render("predictor_nr_system", {{"global_description", global_description(ctx.card)},
                                                     {"fewshot_clause", fewshot_clause(ctx)},
                                                     {"guide", link_guide(plan)},
                                                     {"knowledge", knowledge_section(ctx, Task::nr)},
                                                     {"task_system", prompts::render("task_nr_system", {})}});
  p.user = prompts::render("predictor_nr_user", {{"examples", examples_text(ctx)},
                                                 {"src_id", std::to_string(source)},
                                                 {"source_blocks", nr_source_blocks(source, source_text, plan, ctx)},
                                                 {"candidates", nr_candidates(evidence, plan)},
                                                 {"task_user", prompts::render("task_nr_user", {})}});
  return p;
}

Prompt assemble_ec_prompt(const PairEvidence& e, const PromptContext& ctx) {
  require_context(ctx, Task::ec);
  const auto plan = ec_plan(ctx);
  std::string blocks = ec_blocks(e, plan, *ctx.store);
  append_block(blocks, profile_block(ctx, "Source", e.src));
  append_block(blocks, profile_block(ctx, "Destination", e.dst));
  auto classes = ordered_json::array();
  for (LabelId l : ctx.store->label_ids()) classes.push_back(std::string(ctx.store->label_text(l)));
  Prompt p;
  p.system = prompts::render(
      "predictor_ec_system",
      {{"global_description", global_description(ctx.card)},
       {"fewshot_intro", is_few_shot(ctx.mode) ? "Labeled example edges precede the edge to classify." : ""},
       {"guide", ec_guide(plan)},
       {"knowledge", knowledge_section(ctx, Task::ec)},
       {"task_system", prompts::render("task_ec_system", {})}});
  p.user = prompts::render(
      "predictor_ec_user",
      {{"examples", examples_text(ctx)},
       {"edge_class_names", classes.dump()},
       {"blocks", blocks},
       {"task_user",
        prompts::render("task_ec_user", {{"src_id", std::to_string(e.src)}, {"dst_id", std::to_string(e.dst)}})}});
  return p;
}

// ---------------------------------------------------------------------------
// Leak checks

QueryTruth truth_of(const PredictionRecord& r, const DyTagStore& store, bool use_edge_text) {
  QueryTruth q;
  q.task = r.task;
  q.link = r.truth_link;
  q.positive = r.dst;
  if (r.task == Task::ec) {
    q.label_text = std::string(store.label_text(r.truth_label));
    if (r.edge) q.edge_text = std::string(store.edge_text(store.edge(*r.edge)));
    q.edge_text_allowed = use_edge_text;
  }
  return q;
}

std::optional<std::string> find_leak(std::string_view user_prompt, const QueryTruth& truth) {
  const std::string section(prompts::current_sample_section(user_prompt));
  std::string lower = section;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (section.find("Answer:") != std::string::npos) return "answer marker in current sample";
  if (lower.find("ground truth") != std::string::npos) return "ground-truth wording in current sample";
  switch (truth.task) {
    case Task::lp:
      for (const auto& pat : {fmt::format("\"Prediction\": {}", truth.link), fmt::format("\"Prediction\":{}", truth.link),
                              fmt::format("\"Prediction\": \"{}\"", truth.link)})
        if (section.find(pat) != std::string::npos) return "link answer in current sample";
      break;
    case Task::nr:
      for (const auto& pat : {fmt::format("\"{}\": 1", truth.positive), fmt::format("\"{}\":1", truth.positive)})
        if (section.find(pat) != std::string::npos) return "positive candidate marked in current sample";
      break;
    case Task::ec:
      for (const auto& pat : {fmt::format("\"Prediction\": \"{}\"", truth.label_text),
                              fmt::format("\"Prediction\":\"{}\"", truth.label_text)})
        if (section.find(pat) != std::string::npos) return "true label answer in current sample";
      if (!truth.edge_text_allowed && truth.edge_text.size() >= 8 &&
          section.find(truth.edge_text) != std::string::npos)
        return "target edge text in current sample";
      break;
  }
  return std::nullopt;
}

namespace {

void check_hygiene(const Prompt& p, const QueryTruth& truth) {
  if (auto leak = find_leak(p.user, truth)) throw Error("prompt leak: " + *leak);
}

}  // namespace

// ---------------------------------------------------------------------------
// Predictors

PredictionRecord predict_link(const PairEvidence& e, int truth, const PromptContext& ctx, ChatGateway& gateway) {
  const auto prompt = assemble_lp_prompt(e, ctx);
  QueryTruth qt;
  qt.task = Task::lp;
  qt.link = truth;
  check_hygiene(prompt, qt);
  PredictionRecord r;
  r.task = Task::lp;
  r.mode = ctx.mode;
  r.src = e.src;
  r.dst = e.dst;
  r.t = e.t;
  r.truth_link = truth;
  std::function<int(const std::string&)> parse = [](const std::string& s) { return parse_binary_answer(s); };
  auto parsed = gateway.complete_parsed(gateway.make_request(prompt.system, prompt.user, "lp"), parse, kReaskBinary);
  r.digests = parsed.digests;
  if (parsed.ok()) {
    r.predicted_link = *parsed.value;
  } else {
    r.fallback_used = true;
    r.predicted_link = (e.hi > 0 || e.cn > 0) ? 1 : 0;
  }
  return r;
}

std::pair<CandidateSet, CandidateSet> recall_and_rank(NodeId source, Timestamp t, std::span<const PairEvidence> pool,
                                                      const PromptContext& ctx) {
  if (ctx.mode == PromptMode::gad) {
    require_context(ctx, Task::nr);
    auto unranked = apply_thresholds(source, t, pool, ctx.knowledge->rules_for("NR"));
    auto ranked = rank_candidates(unranked, &*ctx.knowledge->global_link);
    return {std::move(unranked), std::move(ranked)};
  }
  auto unranked = default_recall(source, t, pool);
  auto ranked = rank_candidates(unranked, static_cast<const GlobalLinkKnowledge*>(nullptr));
  return {std::move(unranked), std::move(ranked)};
}

PredictionRecord retrieve_nodes(NodeId source, Timestamp t, NodeId positive, std::span<const PairEvidence> pool,
                                const PromptContext& ctx, ChatGateway& gateway) {
  PredictionRecord r;
  r.task = Task::nr;
  r.mode = ctx.mode;
  r.src = source;
  r.dst = positive;
  r.t = t;
  r.pool_size = pool.size();
  r.positive_rank = pool.size() + 1;
  auto [unranked, ranked] = recall_and_rank(source, t, pool, ctx);
  const auto& cands = ranked.candidates;
  if (cands.empty()) return r;

  const auto prompt = assemble_nr_prompt(source, ctx.store->node_text(source), cands, ctx);
  QueryTruth qt;
  qt.task = Task::nr;
  qt.positive = positive;
  check_hygiene(prompt, qt);
  std::function<std::map<std::string, double>(const std::string&)> parse = [](const std::string& s) {
    return parse_likelihood_map(s);
  };
  auto parsed = gateway.complete_parsed(gateway.make_request(prompt.system, prompt.user, "nr"), parse);
  r.digests = parsed.digests;

  std::vector<double> likelihood(cands.size(), 0.0);
  if (parsed.ok()) {
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (auto it = parsed.value->find(std::to_string(cands[i].node)); it != parsed.value->end())
        likelihood[i] = it->second;
  } else {
    // Recall order, expressed as strictly decreasing scores.
    r.fallback_used = true;
    const double n = static_cast<double>(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) likelihood[i] = 1.0 - static_cast<double>(i) / n;
  }
  std::vector<std::size_t> order(cands.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return likelihood[a] > likelihood[b]; });
  for (std::size_t i : order) r.ranking.emplace_back(cands[i].node, likelihood[i]);

  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].node != positive) continue;
    std::size_t rank = 1;
    for (std::size_t j = 0; j < cands.size(); ++j)
      if (j != i && likelihood[j] >= likelihood[i]) ++rank;
    r.positive_rank = rank;
  }
  return r;
}

LabelId fallback_label(const PairEvidence& e, std::optional<LabelId> global_modal) {
  if (auto l = e.eld_pair.modal()) return *l;
  if (auto l = e.eld_src.modal()) return *l;
  return global_modal.value_or(0);
}

PredictionRecord classify_edge(const PairEvidence& e, LabelId truth, const PromptContext& ctx, ChatGateway& gateway) {
  const auto prompt = assemble_ec_prompt(e, ctx);
  const auto& store = *ctx.store;
  QueryTruth qt;
  qt.task = Task::ec;
  qt.label_text = std::string(store.label_text(truth));
  qt.edge_text = e.edge_text.value_or("");
  qt.edge_text_allowed = ctx.use_edge_text;
  check_hygiene(prompt, qt);
  PredictionRecord r;
  r.task = Task::ec;
  r.mode = ctx.mode;
  r.src = e.src;
  r.dst = e.dst;
  r.t = e.t;
  r.truth_label = truth;
  std::function<LabelId(const std::string&)> parse = [&](const std::string& raw) {
    const auto j = parse_structured(raw, Schema{"edge classification", {{"Prediction", JsonKind::string}}});
    const std::string text = j["Prediction"];
    auto label = store.find_label(text);
    if (!label) throw ParseError("'" + text + "' is not one of the provided classes", raw);
    return *label;
  };
  auto parsed = gateway.complete_parsed(gateway.make_request(prompt.system, prompt.user, "ec"), parse);
  r.digests = parsed.digests;
  if (parsed.ok()) {
    r.predicted_label = *parsed.value;
  } else {
    r.fallback_used = true;
    r.predicted_label = fallback_label(e, ctx.global_modal_label);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sampling and few-shot examples

std::vector<NodeId> sample_negatives(std::span<const NodeId> pool, NodeId truth, std::size_t count, Rng& rng) {
  std::vector<NodeId> eligible;
  eligible.reserve(pool.size());
  for (NodeId v : pool)
    if (v != truth) eligible.push_back(v);
  if (eligible.size() <= count) return eligible;
  if (2 * count >= eligible.size()) {
    for (std::size_t i = 0; i < count; ++i) std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
    eligible.resize(count);
    return eligible;
  }
  std::vector<NodeId> out;
  std::unordered_set<NodeId> seen;
  while (out.size() < count) {
    const NodeId v = eligible[rng.below(eligible.size())];
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

namespace {

// Stream offsets keep the per-purpose random draws independent.
constexpr std::uint64_t kNrStream = 1ULL << 40;
constexpr std::uint64_t kFewShotStream = 2ULL << 40;

std::string nr_example_blocks(NodeId source, std::string_view source_text,
                              std::span<const PairEvidence* const> evidence, const LinkPlan& plan,
                              const PromptContext& ctx) {
  return "Source Node ID: " + std::to_string(source) + "\n" + nr_source_blocks(source, source_text, plan, ctx) +
         "\n Candidate Destination Nodes: \n" + nr_candidates(evidence, plan);
}

}  // namespace

std::vector<FewShotExample> build_few_shot(const SplitView& split, Task task, const PromptContext& ctx,
                                           std::uint64_t seed, std::size_t count, Direction direction) {
  const auto valid = split.valid();
  if (valid.empty()) throw UsageError("few-shot examples need a nonempty validation split");
  const auto& store = *split.store;
  const std::size_t n = valid.size();
  count = std::min(count, n);
  const auto pool = negative_pool(store);
  EvidenceOptions opts;
  opts.direction = direction;
  opts.include_edge_text = true;
  std::vector<FewShotExample> out;
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t begin = c * n / count;
    const std::size_t end = (c + 1) * n / count;
    auto rng = Rng::derive(seed, kFewShotStream + c);
    const std::size_t i = begin + rng.below(end - begin);
    const auto& edge = valid[i];
    const EdgeIndex idx = split.train_end + i;
    FewShotExample ex;
    switch (task) {
      case Task::lp: {
        const bool positive = c % 2 == 0;
        const NodeId dst = positive ? edge.dst : draw_negative(pool, edge.dst, rng);
        const auto e = pair_evidence(store, {edge.src, dst, edge.ts, std::nullopt}, opts);
        ex.blocks = lp_blocks(e, link_plan(ctx));
        ex.answer = positive ? "1" : "0";
        break;
      }
      case Task::nr: {
        const NodeId neg = draw_negative(pool, edge.dst, rng);
        auto a = pair_evidence(store, {edge.src, std::min(edge.dst, neg), edge.ts, std::nullopt}, opts);
        auto b = pair_evidence(store, {edge.src, std::max(edge.dst, neg), edge.ts, std::nullopt}, opts);
        const PairEvidence* ev[] = {&a, &b};
        ex.blocks = nr_example_blocks(edge.src, store.node_text(edge.src), ev, link_plan(ctx), ctx);
        ordered_json answer = ordered_json::object();
        for (const auto* e : ev) answer[std::to_string(e->dst)] = e->dst == edge.dst ? 1.0 : 0.0;
        ex.answer = answer.dump();
        break;
      }
      case Task::ec: {
        const auto e = pair_evidence(store, {edge.src, edge.dst, edge.ts, idx}, opts);
        ex.blocks = ec_blocks(e, ec_plan(ctx), store);
        ex.answer = ordered_json{{"Prediction", std::string(store.label_text(edge.label))}}.dump();
        break;
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records

nlohmann::json PredictionRecord::to_json() const {
  nlohmann::json j = {{"index", index},
                      {"batch", batch},
                      {"task", task_name(task)},
                      {"mode", mode_name(mode)},
                      {"src", src},
                      {"dst", dst},
                      {"t", t},
                      {"edge", edge ? nlohmann::json(*edge) : nlohmann::json()},
                      {"fallback_used", fallback_used},
                      {"digests", digests}};
  switch (task) {
    case Task::lp:
      j["truth_link"] = truth_link;
      j["predicted_link"] = predicted_link;
      break;
    case Task::nr: {
      auto ranking_json = nlohmann::json::array();
      for (const auto& [node, lik] : ranking) ranking_json.push_back({node, lik});
      j["pool_size"] = pool_size;
      j["positive_rank"] = positive_rank;
      j["ranking"] = ranking_json;
      break;
    }
    case Task::ec:
      j["truth_label"] = truth_label;
      j["predicted_label"] = predicted_label;
      break;
  }
  return j;
}

PredictionRecord PredictionRecord::from_json(const nlohmann::json& j) {
  PredictionRecord r;
  const auto task = parse_task(j.at("task").get<std::string>());
  const auto mode = parse_mode(j.at("mode").get<std::string>());
  if (!task || !mode) throw UsageError("prediction record with unknown task or mode");
  r.task = *task;
  r.mode = *mode;
  r.index = j.at("index").get<std::size_t>();
  r.batch = j.at("batch").get<std::size_t>();
  r.src = j.at("src").get<NodeId>();
  r.dst = j.at("dst").get<NodeId>();
  r.t = j.at("t").get<double>();
  if (!j.at("edge").is_null()) r.edge = j["edge"].get<EdgeIndex>();
  r.fallback_used = j.at("fallback_used").get<bool>();
  r.digests = j.at("digests").get<std::vector<std::string>>();
  switch (r.task) {
    case Task::lp:
      r.truth_link = j.at("truth_link").get<int>();
      r.predicted_link = j.at("predicted_link").get<int>();
      break;
    case Task::nr:
      r.pool_size = j.at("pool_size").get<std::size_t>();
      r.positive_rank = j.at("positive_rank").get<std::size_t>();
      for (const auto& item : j.at("ranking")) r.ranking.emplace_back(item.at(0).get<NodeId>(), item.at(1).get<double>());
      break;
    case Task::ec:
      r.truth_label = j.at("truth_label").get<LabelId>();
      r.predicted_label = j.at("predicted_label").get<LabelId>();
      break;
  }
  return r;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << r.to_json().dump() << "\n";
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read predictions " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw UsageError(fmt::format("{}:{}: invalid JSON", path.string(), lineno));
    out.push_back(PredictionRecord::from_json(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Task runner

namespace {

/// Batch-granular checkpoint: record lines followed by a commit line per batch.
class Checkpoint {
 public:
  Checkpoint(std::optional<std::filesystem::path> path, nlohmann::json header)
      : path_(std::move(path)), header_(std::move(header)) {
    if (!path_) return;
    std::vector<std::string> kept;
    if (std::filesystem::exists(*path_)) load(kept);
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    out_.open(*path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot write checkpoint " + path_->string());
    out_ << nlohmann::json{{"checkpoint_header", header_}}.dump() << "\n";
    for (const auto& line : kept) out_ << line << "\n";
    out_.flush();
  }

  const std::vector<PredictionRecord>* done(std::size_t batch) const {
    auto it = done_.find(batch);
    return it == done_.end() ? nullptr : &it->second;
  }

  void commit(std::size_t batch, const std::vector<PredictionRecord>& records) {
    if (!path_) return;
    for (const auto& r : records) out_ << r.to_json().dump() << "\n";
    out_ << nlohmann::json{{"checkpoint_batch", batch}}.dump() << "\n";
    out_.flush();
  }

 private:
  void load(std::vector<std::string>& kept) {
    std::ifstream in(*path_, std::ios::binary);
    std::string line;
    std::vector<std::string> pending_lines;
    std::vector<PredictionRecord> pending;
    bool header_seen = false;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) break;  // torn final line
      if (j.contains("checkpoint_header")) {
        if (j["checkpoint_header"] != header_)
          throw UsageError("checkpoint " + path_->string() + " belongs to a different run configuration");
        header_seen = true;
      } else if (j.contains("checkpoint_batch")) {
        const auto b = j["checkpoint_batch"].get<std::size_t>();
        done_[b] = std::move(pending);
        pending.clear();
        for (auto& l : pending_lines) kept.push_back(std::move(l));
        kept.push_back(line);
        pending_lines.clear();
      } else {
        pending.push_back(PredictionRecord::from_json(j));
        pending_lines.push_back(line);
      }
    }
    if (!header_seen && !done_.empty()) throw UsageError("checkpoint " + path_->string() + " has no header");
    if (!done_.empty()) spdlog::info("resuming from checkpoint: {} completed batches", done_.size());
  }

  std::optional<std::filesystem::path> path_;
  nlohmann::json header_;
  std::ofstream out_;
  std::map<std::size_t, std::vector<PredictionRecord>> done_;
};

struct Job {
  std::size_t index = 0;
  PairEvidence evidence;
  int truth_link = 0;
  LabelId truth_label = 0;
  std::vector<PairEvidence> pool;  // NR: positive first
};

}  // namespace

std::vector<PredictionRecord> run_task(const SplitView& split, const TaskOptions& opts, ChatGateway& gateway,
                                       const KnowledgeStore* knowledge) {
  const auto& store = *split.store;
  PromptContext ctx;
  ctx.store = &store;
  ctx.mode = opts.mode;
  ctx.knowledge = knowledge;
  if (knowledge && knowledge->dataset_card) ctx.card = *knowledge->dataset_card;
  ctx.use_edge_text = opts.use_edge_text;
  ctx.global_modal_label = store.modal_label(split.valid_end);
  require_context(ctx, opts.task);
  if (is_few_shot(opts.mode))
    ctx.examples = build_few_shot(split, opts.task, ctx, opts.seed, opts.few_shot, opts.direction);

  const auto batches = select_eval_window(split, opts.sample_count, opts.batch_size);
  Checkpoint checkpoint(opts.checkpoint, {{"task", task_name(opts.task)},
                                          {"mode", mode_name(opts.mode)},
                                          {"seed", opts.seed},
                                          {"sample_count", opts.sample_count},
                                          {"batch_size", opts.batch_size},
                                          {"use_edge_text", opts.use_edge_text},
                                          {"nr_negatives", opts.nr_negatives}});
  EvidenceOptions ev_opts;
  ev_opts.direction = opts.direction;
  ev_opts.include_edge_text = true;
  EvidenceCursor cursor(store, ev_opts);
  const auto pool = negative_pool(store);

  std::vector<PredictionRecord> all;
  for (const auto& batch : batches) {
    if (const auto* done = checkpoint.done(batch.index)) {
      all.insert(all.end(), done->begin(), done->end());
      continue;
    }
    std::vector<Job> jobs;
    for (EdgeIndex idx = batch.begin; idx < batch.end; ++idx) {
      const auto& edge = store.edge(idx);
      cursor.advance_to(edge.ts);
      const std::size_t offset = idx - split.valid_end;
      switch (opts.task) {
        case Task::lp: {
          auto rng = Rng::derive(opts.seed, idx);
          const NodeId neg = draw_negative(pool, edge.dst, rng);
          jobs.push_back({2 * offset, cursor.evidence({edge.src, edge.dst, edge.ts, idx}), 1, 0, {}});
          jobs.push_back({2 * offset + 1, cursor.evidence({edge.src, neg, edge.ts, std::nullopt}), 0, 0, {}});
          break;
        }
        case Task::nr: {
          auto rng = Rng::derive(opts.seed, kNrStream + idx);
          Job job;
          job.index = offset;
          job.pool.push_back(cursor.evidence({edge.src, edge.dst, edge.ts, std::nullopt}));
          for (NodeId v : sample_negatives(pool, edge.dst, opts.nr_negatives, rng))
            job.pool.push_back(cursor.evidence({edge.src, v, edge.ts, std::nullopt}));
          job.evidence = job.pool.front();
          jobs.push_back(std::move(job));
          break;
        }
        case Task::ec:
          jobs.push_back({offset, cursor.evidence({edge.src, edge.dst, edge.ts, idx}), 0, edge.label, {}});
          break;
      }
    }
    std::vector<PredictionRecord> records(jobs.size());
    parallel_for(jobs.size(), opts.workers, [&](std::size_t i) {
      const auto& job = jobs[i];
      switch (opts.task) {
        case Task::lp: records[i] = predict_link(job.evidence, job.truth_link, ctx, gateway); break;
        case Task::nr:
          records[i] = retrieve_nodes(job.evidence.src, job.evidence.t, job.evidence.dst, job.pool, ctx, gateway);
          break;
        case Task::ec: records[i] = classify_edge(job.evidence, job.truth_label, ctx, gateway); break;
      }
      records[i].index = job.index;
      records[i].batch = batch.index;
    });
    // Edge references identify the target edge of positive queries.
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const bool positive = opts.task != Task::lp || jobs[i].truth_link == 1;
      const EdgeIndex idx = batch.begin + (opts.task == Task::lp ? i / 2 : i);
      records[i].edge = positive ? std::optional<EdgeIndex>(idx) : std::nullopt;
    }
    checkpoint.commit(batch.index, records);
    all.insert(all.end(), records.begin(), records.end());
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return all;
}

}  // namespace dytag
