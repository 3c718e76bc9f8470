#include "dytag/scripted_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dytag/prompts.hpp"

namespace dytag {

std::optional<CompareOp> parse_compare_op(std::string_view s) {
  if (s == "<") return CompareOp::lt;
  if (s == ">") return CompareOp::gt;
  if (s == "<=" || s == "≤") return CompareOp::le;
  if (s == ">=" || s == "≥") return CompareOp::ge;
  if (s == "=" || s == "==") return CompareOp::eq;
  return std::nullopt;
}

std::string_view compare_op_symbol(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return "<";
    case CompareOp::gt: return ">";
    case CompareOp::le: return "<=";
    case CompareOp::ge: return ">=";
    case CompareOp::eq: return "=";
  }
  return "?";
}

bool compare(double lhs, CompareOp op, double rhs) {
  switch (op) {
    case CompareOp::lt: return lhs < rhs;
    case CompareOp::gt: return lhs > rhs;
    case CompareOp::le: return lhs <= rhs;
    case CompareOp::ge: return lhs >= rhs;
    case CompareOp::eq: return lhs == rhs;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Prompt parsing

namespace {

const std::regex kHiLine(R"(The total number of past interactions between Source ID (\d+) and Destination ID (\d+): (\d+))");
const std::regex kCnLine(R"(The number of shared neighbors between Source ID (\d+) and Destination ID (\d+): (\d+))");
const std::regex kDstFreq(R"(For Destination Node \((\d+)\):[ \t]*\n- Frequency: (\d+))");
const std::regex kCandidate(R"(\n Destination Node ID (\d+):)");
const std::regex kLpTask(R"(Predict the existence of an edge between (\d+) and (\d+))");
const std::regex kEcTask(R"(Predict the class label for the edge between (\d+) and (\d+))");
const std::regex kNrSource(R"(Source Node ID: (\d+))");
const std::regex kEldSrc(R"(\n- Source Node \(\d+\): (\{[^\n]*\}))");
const std::regex kEldDst(R"(\n- Destination Node \(\d+\): (\{[^\n]*\}))");
const std::regex kEldPair(R"(\n- Between Source Node \(\d+\) and Destination Node \(\d+\): (\{[^\n]*\}))");
const std::regex kEdgeClasses(R"(Edge Classes : (\[[^\n]*\])\.)");

NodeId to_id(const std::string& s) { return static_cast<NodeId>(std::stoul(s)); }

nlohmann::ordered_json json_or_null(const std::string& s) {
  auto j = nlohmann::ordered_json::parse(s, nullptr, false);
  return j.is_discarded() ? nlohmann::ordered_json() : j;
}

}  // namespace

PromptSample parse_prompt_sample(std::string_view prompt) {
  PromptSample out;
  const std::string full(prompt);
  std::smatch m;
  if (std::regex_search(full, m, kEdgeClasses)) {
    auto classes = json_or_null(m[1]);
    if (classes.is_array())
      for (const auto& c : classes)
        if (c.is_string()) out.edge_classes.push_back(c.get<std::string>());
  }
  const std::string section(prompts::current_sample_section(prompt));
  if (std::regex_search(section, m, kLpTask) || std::regex_search(section, m, kEcTask)) {
    out.src = to_id(m[1]);
    out.dst = to_id(m[2]);
  } else if (std::regex_search(section, m, kNrSource)) {
    out.src = to_id(m[1]);
  }
  for (auto it = std::sregex_iterator(section.begin(), section.end(), kCandidate);
       it != std::sregex_iterator(); ++it)
    out.candidates.push_back(to_id((*it)[1]));
  for (auto it = std::sregex_iterator(section.begin(), section.end(), kHiLine);
       it != std::sregex_iterator(); ++it) {
    const double v = std::stod((*it)[3]);
    if (!out.hi) out.hi = v;
    out.candidate_hi[to_id((*it)[2])] = v;
  }
  if (std::regex_search(section, m, kCnLine)) out.cn = std::stod(m[3]);
  if (std::regex_search(section, m, kDstFreq)) out.dnf = std::stod(m[2]);
  if (std::regex_search(section, m, kEldSrc)) out.eld_src = json_or_null(m[1]);
  if (std::regex_search(section, m, kEldDst)) out.eld_dst = json_or_null(m[1]);
  if (std::regex_search(section, m, kEldPair)) out.eld_pair = json_or_null(m[1]);
  return out;
}

// ---------------------------------------------------------------------------
// Heuristic answers

namespace {

const std::string& first_user(const ChatRequest& r) {
  for (const auto& m : r.messages)
    if (m.role == "user") return m.content;
  throw MockMissError("request has no user message");
}

std::optional<std::string> first_key(const nlohmann::ordered_json& j) {
  if (!j.is_object() || j.empty()) return std::nullopt;
  return j.begin().key();
}

std::string significance_for_gap(double gap) {
  const double g = std::fabs(gap);
  if (g >= 0.5) return "Extremely Significant";
  if (g >= 0.2) return "Helpful";
  if (g >= 0.05) return "Maybe Related";
  return "Not Relevant";
}

std::string answer_lp(const std::string& prompt) {
  const auto s = parse_prompt_sample(prompt);
  return (s.hi.value_or(0) > 0 || s.cn.value_or(0) > 0) ? "1" : "0";
}

std::string answer_nr(const std::string& prompt) {
  const auto s = parse_prompt_sample(prompt);
  double max_hi = 0;
  for (const auto& [id, h] : s.candidate_hi) max_hi = std::max(max_hi, h);
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (NodeId id : s.candidates) {
    auto it = s.candidate_hi.find(id);
    const double h = it == s.candidate_hi.end() ? 0 : it->second;
    out[std::to_string(id)] = max_hi > 0 ? h / max_hi : 0.0;
  }
  return out.dump();
}

std::string answer_ec(const std::string& prompt, const HeuristicConfig& cfg) {
  const auto s = parse_prompt_sample(prompt);
  auto label = first_key(s.eld_pair);
  if (!label) label = first_key(s.eld_src);
  if (!label && !cfg.global_modal_label.empty()) label = cfg.global_modal_label;
  if (!label && !s.edge_classes.empty()) label = s.edge_classes.front();
  if (!label) throw MockMissError("edge classification prompt without any label evidence");
  return nlohmann::ordered_json{{"Prediction", *label}}.dump();
}

std::string answer_initial() {
  return nlohmann::ordered_json{
      {"thought", "The description names the entities, their interactions and the attached texts."},
      {"speak", "Dataset card extracted."},
      {"task_type", "link prediction"},
      {"graph_type", "dynamic text-attributed"},
      {"node_type", "entities"},
      {"node_text_type", "names or descriptions of the entities"},
      {"edge_type", "timestamped interaction"},
      {"edge_text_type", "content of the interaction"}}
      .dump(2);
}

double positive_share(const std::string& prompt, const char* label, int occurrence) {
  const std::regex re(std::string("- ") + label + R"(: (\{[^\n]*\}))");
  int seen = 0;
  for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), re); it != std::sregex_iterator();
       ++it) {
    if (seen++ != occurrence) continue;
    auto j = json_or_null((*it)[1]);
    if (j.is_object() && j.contains(">0") && j[">0"].is_number()) return j[">0"].get<double>();
  }
  throw MockMissError(std::string("structure prompt lacks a distribution for ") + label);
}

std::string answer_structure(const std::string& prompt) {
  struct Item {
    const char* line;
    const char* key;
    const char* metric;
    const char* phrase;
  };
  const Item items[] = {
      {"Historical interaction count", "Historical Interaction", "HI", "Historical interaction count"},
      {"Common neighbors", "Common Neighbors", "CN", "Common neighbors"},
      {"Destination Node Frequency", "Destination Node Frequency", "DNF", "Destination Node Frequency"}};
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  auto clauses = nlohmann::ordered_json::array();
  std::string negative_text;
  for (const auto& it : items) {
    const double pos = positive_share(prompt, it.line, 0);
    const double neg = positive_share(prompt, it.line, 1);
    const double gap = pos - neg;
    const auto level = significance_for_gap(gap);
    const bool high = gap > 0;
    out[it.key] = {
        {"Significance", level},
        {"Explanation", std::string(it.phrase) + " > 0 holds for " + std::to_string(std::lround(pos * 100)) +
                            "% of positives and " + std::to_string(std::lround(neg * 100)) + "% of negatives."},
        {"Favors", high ? "high" : "low"},
        {"Positive Indicator", std::string(it.phrase) + (high ? " > 0" : " = 0")},
        {"Negative Indicator", std::string(it.phrase) + (high ? " = 0" : " > 0")}};
    if (high && (level == "Extremely Significant" || level == "Helpful")) {
      clauses.push_back({{"metric", it.metric}, {"op", "<"}, {"value", 1}});
      negative_text += (negative_text.empty() ? "" : " and ") + std::string(it.phrase) + " = 0";
    }
  }
  out["Overall Indicators"] = {
      {"Positive Indicator", "Any significant metric above 0"},
      {"Negative Indicator", negative_text.empty() ? "None" : negative_text},
      {"Negative Rule", {{"combinator", "AND"}, {"clauses", clauses}}}};
  out["Structure Rules and Report"] =
      "Metrics whose positive share exceeds the negative share favor high values.";
  return out.dump(2);
}

std::string answer_text_agent() {
  return nlohmann::ordered_json{
      {"Significance", "Not Relevant"},
      {"Reason", "The texts of positive and negative pairs show no consistent semantic difference."},
      {"Explanation", "Node texts act as identifiers and do not separate the two classes."}}
      .dump(2);
}

std::string answer_edge_text_agent() {
  return nlohmann::ordered_json{
      {"Node Text",
       {{"Significance", "Maybe Related"},
        {"Reason", "Node texts carry weak context about the interaction."},
        {"Guidance", "Use node texts only to break ties between plausible labels."}}},
      {"Edge Text",
       {{"Significance", "Helpful"},
        {"Reason", "Edge texts describe the interaction that the label summarizes."},
        {"Guidance", "Match the topic of the edge text to the label names."}}}}
      .dump(2);
}

std::string answer_eld_agent(const std::string& prompt) {
  const std::regex re(R"(historical edge label reoccurrence distribution: (\{[^\n]*\}))");
  double best = 0;
  for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), re); it != std::sregex_iterator();
       ++it) {
    auto j = json_or_null((*it)[1]);
    if (!j.is_object()) continue;
    if (j.value("counted_samples", 0) <= 0) continue;
    best = std::max(best, j.value("top1", 0.0));
  }
  std::string level = best >= 50 ? "Extremely Significant"
                      : best >= 30 ? "Helpful"
                      : best > 0   ? "Maybe Related"
                                   : "Not Relevant";
  return nlohmann::ordered_json{
      {"Significance", level},
      {"Reason", "The most frequent historical label recurs in " + std::to_string(std::lround(best)) +
                     "% of counted samples."},
      {"Guidance", best > 0 ? "Use the most frequent historical edge label for predicting future edge labels."
                            : "Historical labels do not predict future labels."}}
      .dump(2);
}

std::string answer_local_text(const std::string& prompt) {
  std::smatch m;
  std::string description = "Node with little textual information.";
  static const std::regex text_re(R"(Node text: ([^\n]*))");
  if (std::regex_search(prompt, m, text_re) && m[1].length() > 0)
    description = "Node described as '" + m[1].str().substr(0, 40) + "'.";
  std::string label_pref = "Not Significant";
  static const std::regex dist_re(R"(Edge label distribution of the node: (\{[^\n]*\}))");
  if (std::regex_search(prompt, m, dist_re)) {
    auto j = json_or_null(m[1]);
    if (j.is_object() && !j.empty()) {
      double total = 0;
      for (const auto& [k, v] : j.items()) total += v.get<double>();
      const auto& [label, count] = *j.items().begin();
      label_pref = "The node prefers edges labeled '" + label + "' (" +
                   std::to_string(std::lround(100.0 * count.get<double>() / total)) + "%).";
    }
  }
  return nlohmann::ordered_json{{"Node Description", description},
                                {"Neighbor Preference", "Not Significant"},
                                {"Edge Text Preference", "Not Significant"},
                                {"Edge Label Preference", label_pref},
                                {"Explanation", "Derived from the node text and its label distribution."}}
      .dump(2);
}

std::string answer_local_structure(const std::string& prompt) {
  std::smatch m;
  static const std::regex freq_re(R"(- Frequency: (\d+))");
  static const std::regex avg_re(R"(- Average Frequency of Neighbors: ([0-9.]+))");
  const double freq = std::regex_search(prompt, m, freq_re) ? std::stod(m[1]) : 0;
  const double avg = std::regex_search(prompt, m, avg_re) ? std::stod(m[1]) : 0;
  std::string pref = "Not Significant";
  if (freq >= 5)
    pref = avg >= 5 ? "The node prefers well-established and highly connected neighbors."
                    : "The node prefers new or rarely active neighbors.";
  return nlohmann::ordered_json{{"Structural Preference", pref}}.dump(2);
}

std::string answer_reflection(const std::string& prompt) {
  std::smatch m;
  static const std::regex acc_re(R"(Accuracy: ([0-9.]+))");
  const double accuracy = std::regex_search(prompt, m, acc_re) ? std::stod(m[1]) : 0;
  if (accuracy >= 0.9)
    return nlohmann::ordered_json{{"Significance", "Not Significant"}, {"Supplementation", ""}}.dump(2);
  std::size_t total = 0, cold_with_cn = 0, repeated = 0;
  const auto begin = prompt.find("False Positive Samples: ");
  const auto end = prompt.find("\nReview the false positive", begin);
  if (begin != std::string::npos && end != std::string::npos) {
    const auto start = begin + std::string_view("False Positive Samples: ").size();
    auto arr = nlohmann::json::parse(prompt.substr(start, end - start), nullptr, false);
    if (arr.is_array())
      for (const auto& s : arr) {
        ++total;
        const double hi = s.value("Historical Interaction Count", 0.0);
        const double cn = s.value("Common Neighbor Count", 0.0);
        if (hi == 0 && cn > 0) ++cold_with_cn;
        if (hi > 0) ++repeated;
      }
  }
  std::string sentence;
  if (total > 0 && 2 * cold_with_cn > total)
    sentence =
        "When historical interaction count is 0 and common neighbors are high, then prioritize textual "
        "analysis to avoid false positives due to lack of contextual relevance.";
  else if (total > 0 && 2 * repeated > total)
    sentence =
        "When historical interaction count is positive but the destination node is rarely a destination, "
        "then require further structural support before predicting a link.";
  else
    sentence = "When historical interaction count and common neighbors are both 0, then predict no link.";
  return nlohmann::ordered_json{{"Significance", "Significant"}, {"Supplementation", sentence}}.dump(2);
}

}  // namespace

std::string heuristic_response(const ChatRequest& r, const HeuristicConfig& cfg) {
  const auto& prompt = first_user(r);
  const auto& p = r.purpose;
  if (p == "lp") return answer_lp(prompt);
  if (p == "nr") return answer_nr(prompt);
  if (p == "ec") return answer_ec(prompt, cfg);
  if (p == "agent.initial") return answer_initial();
  if (p == "agent.structure") return answer_structure(prompt);
  if (p == "agent.text") return answer_text_agent();
  if (p == "agent.edge_text") return answer_edge_text_agent();
  if (p == "agent.eld") return answer_eld_agent(prompt);
  if (p == "agent.local_text") return answer_local_text(prompt);
  if (p == "agent.local_structure") return answer_local_structure(prompt);
  if (p == "agent.reflection") return answer_reflection(prompt);
  throw MockMissError("heuristic mock has no answer for purpose '" + p + "'");
}

// ---------------------------------------------------------------------------
// Rules

ScriptedBackend::ScriptedBackend(std::vector<MockRule> rules, std::optional<HeuristicConfig> heuristic)
    : rules_(std::move(rules)), heuristic_(std::move(heuristic)) {
  if (rules_.empty() && !heuristic_) throw ConfigError("scripted backend needs at least one rule");
}

namespace {

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

bool matches(const MockMatcher& m, const ChatRequest& r, const std::string& text,
             const PromptSample& sample) {
  if (m.task && *m.task != r.purpose) return false;
  switch (m.type) {
    case MockMatcher::Type::any: return true;
    case MockMatcher::Type::substring: return text.find(m.pattern) != std::string::npos;
    case MockMatcher::Type::regex: return std::regex_search(text, *m.compiled);
    case MockMatcher::Type::metric:
      for (const auto& p : m.predicates) {
        const auto& v = p.metric == Metric::hi ? sample.hi : p.metric == Metric::cn ? sample.cn : sample.dnf;
        if (!compare(v.value_or(0), p.op, p.value)) return false;
      }
      return true;
  }
  return false;
}

}  // namespace

ChatResponse ScriptedBackend::complete(const ChatRequest& r) {
  std::string text;
  for (const auto& m : r.messages) text += m.content + "\n";
  const auto& prompt = first_user(r);
  const auto sample = parse_prompt_sample(prompt);
  ChatResponse resp;
  resp.backend = BackendKind::mock;
  for (const auto& rule : rules_) {
    if (!matches(rule.match, r, text, sample)) continue;
    resp.content = rule.respond;
    replace_all(resp.content, "{src_id}", sample.src ? std::to_string(*sample.src) : std::string{});
    replace_all(resp.content, "{dst_id}", sample.dst ? std::to_string(*sample.dst) : std::string{});
    return resp;
  }
  if (!heuristic_) throw MockMissError("no mock rule matches request for purpose '" + r.purpose + "'");
  resp.content = heuristic_response(r, *heuristic_);
  return resp;
}

std::vector<MockRule> ScriptedBackend::parse_rules(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("mock rules must be a JSON list");
  std::vector<MockRule> rules;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& item = j[i];
    const std::string where = "mock rule " + std::to_string(i);
    if (!item.is_object() || !item.contains("respond") || !item["respond"].is_string())
      throw ConfigError(where + ": needs a string 'respond'");
    MockRule rule;
    rule.respond = item["respond"].get<std::string>();
    const auto match = item.value("match", nlohmann::json::object());
    if (match.contains("task")) rule.match.task = match["task"].get<std::string>();
    if (match.contains("substring")) {
      rule.match.type = MockMatcher::Type::substring;
      rule.match.pattern = match["substring"].get<std::string>();
    } else if (match.contains("regex")) {
      rule.match.type = MockMatcher::Type::regex;
      rule.match.pattern = match["regex"].get<std::string>();
      try {
        rule.match.compiled.emplace(rule.match.pattern);
      } catch (const std::regex_error& e) {
        throw ConfigError(where + ": invalid regex: " + e.what());
      }
    } else if (match.contains("metric") || match.contains("all")) {
      rule.match.type = MockMatcher::Type::metric;
      const auto preds = match.contains("all") ? match["all"] : nlohmann::json::array({match});
      for (const auto& p : preds) {
        MetricPredicate mp;
        const auto metric = parse_metric(p.value("metric", std::string{}));
        const auto op = parse_compare_op(p.value("op", std::string{}));
        if (!metric || !op || !p.contains("value") || !p["value"].is_number())
          throw ConfigError(where + ": metric predicate needs metric, op and numeric value");
        mp.metric = *metric;
        mp.op = *op;
        mp.value = p["value"].get<double>();
        rule.match.predicates.push_back(mp);
      }
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<MockRule> ScriptedBackend::load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read mock rules " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": mock rules are not valid JSON");
  return parse_rules(j);
}

std::shared_ptr<ScriptedBackend> make_heuristic_mock(HeuristicConfig cfg) {
  return std::make_shared<ScriptedBackend>(std::vector<MockRule>{}, std::move(cfg));
}

}  // namespace dytag
