#include "dytag/reflection.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>

#include "dytag/parallel.hpp"
#include "dytag/prediction.hpp"
#include "dytag/prompts.hpp"
#include "dytag/stats_prep.hpp"
#include "dytag/structured_output.hpp"

namespace dytag {

namespace {

constexpr std::size_t kProbeFactor = 4;

}  // namespace

TrajectorySet collect_trajectories(const SplitView& split, const KnowledgeStore& knowledge, ChatGateway& gateway,
                                   std::size_t count, std::uint64_t seed, Direction direction, std::size_t workers) {
  if (!knowledge.global_link) throw UsageError("reflection requires global link knowledge");
  auto queries = build_negative_validation_samples(split, seed);
  if (queries.size() > kProbeFactor * count) queries.resize(kProbeFactor * count);
  EvidenceOptions opts;
  opts.direction = direction;
  const auto evidence = batch_evidence(*split.store, queries, opts);

  PromptContext ctx;
  ctx.store = split.store;
  ctx.mode = PromptMode::gad;
  ctx.knowledge = &knowledge;
  if (knowledge.dataset_card) ctx.card = *knowledge.dataset_card;
  ctx.include_reflection = false;

  std::vector<PredictionRecord> records(evidence.size());
  parallel_for(evidence.size(), workers,
               [&](std::size_t i) { records[i] = predict_link(evidence[i], 0, ctx, gateway); });

  TrajectorySet out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.digests.insert(out.digests.end(), records[i].digests.begin(), records[i].digests.end());
    ++out.probed;
    if (records[i].predicted_link == 0) {
      ++out.correct;
    } else if (out.false_positives.size() < count) {
      out.false_positives.push_back({evidence[i], 1});
    }
  }
  return out;
}

AgentResult<ReflectionOutcome> run_reflection(const TrajectorySet& trajectories, const GlobalLinkKnowledge& knowledge,
                                              ChatGateway& gateway) {
  auto samples = nlohmann::ordered_json::array();
  for (const auto& t : trajectories.false_positives)
    samples.push_back({{"Source Node", t.evidence.src},
                       {"Destination Node", t.evidence.dst},
                       {"Historical Interaction Count", t.evidence.hi},
                       {"Common Neighbor Count", t.evidence.cn},
                       {"Destination Node Frequency", t.evidence.dst_activity.frequency},
                       {"Prediction", t.prediction}});
  const auto& format = prompts::template_text("output_reflection");
  const auto system = prompts::render("reflection_system", {{"output_format", format}});
  const auto user = prompts::render("reflection_user", {{"global_summary", describe_link_knowledge(knowledge)},
                                                        {"accuracy", fmt::format("{:.4f}", trajectories.accuracy())},
                                                        {"error_samples", samples.dump()},
                                                        {"output_format", format}});
  const Schema schema{"reflection", {{"Significance", JsonKind::string}, {"Supplementation", JsonKind::string}}};
  std::function<ReflectionOutcome(const std::string&)> parse = [&](const std::string& raw) {
    const auto j = parse_structured(raw, schema);
    const std::string level = j["Significance"];
    ReflectionOutcome r;
    if (level == "Significant")
      r.significant = true;
    else if (level != kNotSignificant)
      throw ParseError("unknown reflection significance '" + level + "'", raw);
    r.supplementation = j["Supplementation"];
    if (r.supplementation.empty()) r.significant = false;
    if (!r.significant) r.supplementation.clear();
    return r;
  };
  auto parsed = gateway.complete_parsed(gateway.make_request(system, user, "agent.reflection"), parse);
  AgentResult<ReflectionOutcome> out{{}, parsed.digests};
  if (parsed.ok())
    out.value = *parsed.value;
  else
    spdlog::warn("reflection response unusable, recording Not Significant: {}", parsed.error);
  return out;
}

}  // namespace dytag
