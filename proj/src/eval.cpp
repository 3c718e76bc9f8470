#include "dytag/eval.hpp"

#include <spdlog/fmt/fmt.h>

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "dytag/agents.hpp"
#include "dytag/error.hpp"

namespace dytag {

// ---------------------------------------------------------------------------
// Reports

nlohmann::json EvalReport::to_json() const {
  nlohmann::json batches = nlohmann::json::object();
  for (const auto& [b, m] : per_batch) batches[std::to_string(b)] = m;
  return {{"schema_version", kReportSchemaVersion},
          {"task", task_name(task)},
          {"mode", mode_name(mode)},
          {"dataset", dataset},
          {"n_samples", n_samples},
          {"metrics", metrics},
          {"per_batch", batches},
          {"config_digest", config_digest}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != kReportSchemaVersion) throw UsageError("unsupported report schema version");
  EvalReport r;
  const auto task = parse_task(j.at("task").get<std::string>());
  const auto mode = parse_mode(j.at("mode").get<std::string>());
  if (!task || !mode) throw UsageError("report with unknown task or mode");
  r.task = *task;
  r.mode = *mode;
  r.dataset = j.at("dataset").get<std::string>();
  r.n_samples = j.at("n_samples").get<std::size_t>();
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  for (const auto& [b, m] : j.at("per_batch").items())
    r.per_batch[std::stoul(b)] = m.get<std::map<std::string, double>>();
  r.config_digest = j.at("config_digest").get<std::string>();
  return r;
}

std::string EvalReport::render_text() const {
  std::string out = fmt::format("task: {}  mode: {}  dataset: {}  samples: {}\n", task_name(task), mode_name(mode),
                                dataset.empty() ? "-" : dataset, n_samples);
  // hits@3 before hits@10: compare the non-numeric prefix, then the number.
  std::vector<std::pair<std::string, double>> rows(metrics.begin(), metrics.end());
  auto split_key = [](const std::string& s) {
    const auto cut = s.find_last_not_of("0123456789") + 1;
    return std::make_pair(s.substr(0, cut), cut < s.size() ? std::stoul(s.substr(cut)) : 0UL);
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const auto& a, const auto& b) { return split_key(a.first) < split_key(b.first); });
  std::size_t width = 6;
  for (const auto& [name, v] : rows) width = std::max(width, name.size());
  out += fmt::format("{:<{}}  {:>7}\n", "metric", width, "value");
  for (const auto& [name, v] : rows) out += fmt::format("{:<{}}  {:>7.2f}\n", name, width, 100.0 * v);
  if (!config_digest.empty()) out += "config: " + config_digest + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

namespace {

void require_records(std::span<const PredictionRecord> records, Task task) {
  if (records.empty()) throw UsageError(fmt::format("no {} records to score", task_name(task)));
  for (const auto& r : records)
    if (r.task != task) throw UsageError(fmt::format("expected {} records, found {}", task_name(task), task_name(r.task)));
}

EvalReport base_report(std::span<const PredictionRecord> records, Task task) {
  EvalReport rep;
  rep.task = task;
  rep.mode = records.front().mode;
  rep.n_samples = records.size();
  return rep;
}

template <class Fn>
void per_batch(EvalReport& rep, std::span<const PredictionRecord> records, Fn&& score) {
  std::map<std::size_t, std::vector<PredictionRecord>> groups;
  for (const auto& r : records) groups[r.batch].push_back(r);
  if (groups.size() < 2) return;
  for (const auto& [b, group] : groups) rep.per_batch[b] = score(std::span<const PredictionRecord>(group));
}

std::map<std::string, double> lp_metrics(std::span<const PredictionRecord> records) {
  std::size_t correct = 0;
  for (const auto& r : records) correct += r.predicted_link == r.truth_link;
  return {{"accuracy", static_cast<double>(correct) / static_cast<double>(records.size())}};
}

std::map<std::string, double> nr_metrics(std::span<const PredictionRecord> records, const std::vector<std::size_t>& ks) {
  std::map<std::string, double> m;
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (const auto& r : records) hits += r.positive_rank >= 1 && r.positive_rank <= k;
    m[fmt::format("hits@{}", k)] = static_cast<double>(hits) / static_cast<double>(records.size());
  }
  return m;
}

std::map<std::string, double> ec_metrics(std::span<const PredictionRecord> records) {
  std::vector<LabelId> truth, pred;
  for (const auto& r : records) {
    truth.push_back(r.truth_label);
    pred.push_back(r.predicted_label);
  }
  const auto s = weighted_prf(truth, pred);
  return {{"weighted_precision", s.precision}, {"weighted_recall", s.recall}, {"weighted_f1", s.f1}};
}

}  // namespace

EvalReport score_lp(std::span<const PredictionRecord> records) {
  require_records(records, Task::lp);
  auto rep = base_report(records, Task::lp);
  rep.metrics = lp_metrics(records);
  per_batch(rep, records, lp_metrics);
  return rep;
}

EvalReport score_nr(std::span<const PredictionRecord> records, const std::vector<std::size_t>& ks) {
  require_records(records, Task::nr);
  auto rep = base_report(records, Task::nr);
  rep.metrics = nr_metrics(records, ks);
  per_batch(rep, records, [&](std::span<const PredictionRecord> g) { return nr_metrics(g, ks); });
  return rep;
}

EvalReport score_ec(std::span<const PredictionRecord> records) {
  require_records(records, Task::ec);
  auto rep = base_report(records, Task::ec);
  rep.metrics = ec_metrics(records);
  per_batch(rep, records, ec_metrics);
  return rep;
}

WeightedScores weighted_prf(std::span<const LabelId> truth, std::span<const LabelId> predicted) {
  if (truth.size() != predicted.size()) throw UsageError("truth and prediction counts differ");
  if (truth.empty()) throw UsageError("no labels to score");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<LabelId, Counts> per_class;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) {
      ++per_class[truth[i]].tp;
    } else {
      ++per_class[truth[i]].fn;
      ++per_class[predicted[i]].fp;
    }
  }
  WeightedScores s;
  const double n = static_cast<double>(truth.size());
  for (const auto& [label, c] : per_class) {
    const double support = static_cast<double>(c.tp + c.fn);
    if (support == 0) continue;
    const double p = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    const double r = static_cast<double>(c.tp) / support;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    s.precision += support * p / n;
    s.recall += support * r / n;
    s.f1 += support * f / n;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Label consistency

namespace {

struct Group {
  std::vector<LabelCount> labels;  // first-occurrence order
  std::size_t size = 0;
};

void add_label(Group& g, LabelId l) {
  ++g.size;
  for (auto& lc : g.labels)
    if (lc.label == l) {
      ++lc.count;
      return;
    }
  g.labels.push_back({l, 1});
}

/// (consistency, repeated fraction, qualifying groups) over one grouping.
std::tuple<std::optional<double>, double, std::size_t> consistency_of(const std::vector<Group>& groups,
                                                                      std::size_t total, double min_fraction) {
  std::size_t repeated = 0, matches = 0, qualifying = 0;
  for (const auto& g : groups) {
    if (g.size < 2) continue;
    ++qualifying;
    repeated += g.size;
    std::uint64_t best = 0;
    for (const auto& lc : g.labels) best = std::max(best, lc.count);
    matches += best;
  }
  const double fraction = total ? static_cast<double>(repeated) / static_cast<double>(total) : 0.0;
  std::optional<double> value;
  if (repeated > 0 && fraction >= min_fraction) value = static_cast<double>(matches) / static_cast<double>(repeated);
  return {value, fraction, qualifying};
}

}  // namespace

ConsistencyReport label_consistency(const DyTagStore& store, const ConsistencyOptions& opts) {
  const std::size_t end = std::min(opts.end.value_or(store.num_edges()), store.num_edges());
  const std::size_t begin = std::min(opts.begin, end);
  std::unordered_map<std::uint64_t, std::size_t> pair_index;
  std::unordered_map<std::string_view, std::size_t> text_index;
  std::vector<Group> pairs, texts;
  std::size_t with_text = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& e = store.edge(i);
    NodeId a = e.src, b = e.dst;
    if (!opts.directed && a > b) std::swap(a, b);
    const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
    auto [pit, pair_fresh] = pair_index.try_emplace(key, pairs.size());
    if (pair_fresh) pairs.emplace_back();
    add_label(pairs[pit->second], e.label);

    // Identical texts may sit under different ids, so group on content.
    const auto text = store.edge_text(e);
    if (text.empty()) continue;
    ++with_text;
    auto [tit, text_fresh] = text_index.try_emplace(text, texts.size());
    if (text_fresh) texts.emplace_back();
    add_label(texts[tit->second], e.label);
  }

  ConsistencyReport rep;
  const auto [pc, pf, pg] = consistency_of(pairs, end - begin, opts.min_fraction_repeated);
  const auto [tc, tf, tg] = consistency_of(texts, with_text, opts.min_fraction_repeated);
  rep.pair_consistency = pc;
  rep.repeated_pair_fraction = pf;
  rep.pair_groups = pg;
  rep.text_consistency = tc;
  rep.repeated_text_fraction = tf;
  rep.text_groups = tg;
  return rep;
}

nlohmann::json ConsistencyReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"schema_version", kReportSchemaVersion},
          {"pair_consistency", opt(pair_consistency)},
          {"text_consistency", opt(text_consistency)},
          {"pair_groups", pair_groups},
          {"text_groups", text_groups},
          {"repeated_pair_fraction", repeated_pair_fraction},
          {"repeated_text_fraction", repeated_text_fraction}};
}

std::string ConsistencyReport::render_text() const {
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", 100.0 * *v) : std::string("-"); };
  return fmt::format("{:<18}{:>8}{:>10}{:>12}\n{:<18}{:>8}{:>10}{:>12.2f}\n{:<18}{:>8}{:>10}{:>12.2f}\n", "grouping",
                     "value", "groups", "repeated%", "pair", cell(pair_consistency), pair_groups,
                     100.0 * repeated_pair_fraction, "edge text", cell(text_consistency), text_groups,
                     100.0 * repeated_text_fraction);
}

// ---------------------------------------------------------------------------
// Pareto coverage

ParetoReport pareto_coverage(const SplitView& split, double fraction) {
  ParetoReport rep;
  rep.fraction = fraction;
  rep.selected = select_active_nodes(split, fraction);
  const std::unordered_set<NodeId> chosen(rep.selected.begin(), rep.selected.end());
  const auto& store = *split.store;
  std::size_t all = 0, test = 0;
  for (std::size_t i = 0; i < store.num_edges(); ++i) {
    const auto& e = store.edge(i);
    if (!chosen.count(e.src) && !chosen.count(e.dst)) continue;
    ++all;
    test += i >= split.valid_end;
  }
  rep.coverage_all = store.num_edges() ? static_cast<double>(all) / static_cast<double>(store.num_edges()) : 0.0;
  rep.coverage_test = split.test_size() ? static_cast<double>(test) / static_cast<double>(split.test_size()) : 0.0;
  return rep;
}

nlohmann::json ParetoReport::to_json() const {
  return {{"schema_version", kReportSchemaVersion},
          {"fraction", fraction},
          {"selected_nodes", selected.size()},
          {"coverage_all", coverage_all},
          {"coverage_test", coverage_test}};
}

std::string ParetoReport::render_text() const {
  return fmt::format("top {:.2f}% nodes ({}): coverage all {:.2f}%, test {:.2f}%\n", 100.0 * fraction,
                     selected.size(), 100.0 * coverage_all, 100.0 * coverage_test);
}

}  // namespace dytag
