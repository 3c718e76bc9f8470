// Acceptance checks. Prints one PASS, FAIL or SKIP line per criterion and
// exits nonzero when any criterion fails.
//
// DYTAG_DTGB_DIR names a directory holding one subdirectory per benchmark
// dataset (Enron, GDELT, ICEWS1819, Googlemap_CT, Stack_elec). Each holds
// either the canonical four files or the raw benchmark files.

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dytag/agents.hpp"
#include "dytag/config.hpp"
#include "dytag/eval.hpp"
#include "dytag/pipeline.hpp"
#include "dytag/recall.hpp"
#include "dytag/rng.hpp"
#include "dytag/stats_prep.hpp"
#include "dytag/synthetic.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace dytag;
namespace oracle = dytag::testing::oracle;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::skip, std::move(d)}; }

/// Collects the first few mismatches so a failure explains itself.
struct Mismatches {
  std::size_t count = 0;
  std::vector<std::string> first;
  void add(std::string what) {
    if (first.size() < 3) first.push_back(std::move(what));
    ++count;
  }
  bool empty() const { return count == 0; }
  std::string summary() const {
    std::string s = fmt::format("{} mismatches", count);
    for (const auto& f : first) s += "; " + f;
    return s;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory removed on destruction.
class Scratch {
 public:
  explicit Scratch(const std::string& tag) {
    path_ = fs::temp_directory_path() / fmt::format("dytag-accept-{}-{}", tag, std::random_device{}());
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

RunConfig config_in(const fs::path& dir, const nlohmann::json& j) {
  auto r = parse_config(j, dir, std::nullopt);
  if (!r.config) throw ConfigError(r.errors.front());
  return *r.config;
}

bool eld_matches(const EdgeLabelDistribution& got, const oracle::Eld& want) { return oracle::same(got, want); }

// Transcripts produced by the runs below, with the records they served.
struct TranscriptSource {
  fs::path transcript;
  fs::path run_dir;
  const DyTagStore* store;
  bool use_edge_text;
};
std::vector<TranscriptSource> g_transcripts;
std::vector<std::unique_ptr<DyTagStore>> g_stores;

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  constexpr int kGraphs = 1000, kQueries = 50;
  Mismatches bad;
  std::size_t queries = 0;
  for (int g = 0; g < kGraphs; ++g) {
    Rng rng(Rng::derive(20250, static_cast<std::uint64_t>(g)).next());
    const std::size_t nodes = 2 + rng.below(39);
    const auto store = generate_synthetic({.nodes = nodes,
                                           .edges = 1 + rng.below(200),
                                           .labels = 1 + rng.below(6),
                                           .seed = static_cast<std::uint64_t>(g),
                                           .bipartite = false,
                                           .repeat_prob = rng.uniform(),
                                           .tie_prob = 0.3 * rng.uniform(),
                                           .self_loops = g % 4 == 0});
    const bool directed = g % 2 == 1;
    std::vector<PairQuery> qs;
    const auto horizon = static_cast<std::uint64_t>(store.edges().back().ts) + 2;
    for (int i = 0; i < kQueries; ++i)
      qs.push_back({static_cast<NodeId>(1 + rng.below(nodes + 1)), static_cast<NodeId>(1 + rng.below(nodes + 1)),
                    static_cast<double>(rng.below(horizon + 1)), std::nullopt});
    std::sort(qs.begin(), qs.end(), [](const PairQuery& a, const PairQuery& b) { return a.t < b.t; });
    EvidenceOptions opts;
    opts.direction = directed ? Direction::directed : Direction::undirected;
    const auto got = batch_evidence(store, qs, opts);
    for (std::size_t i = 0; i < qs.size(); ++i, ++queries) {
      const auto& q = qs[i];
      const auto& e = got[i];
      const auto where = fmt::format("graph {} ({},{},{})", g, q.src, q.dst, q.t);
      if (e.hi != oracle::hi(store, q.src, q.dst, q.t, directed)) bad.add(where + " HI");
      if (e.cn != oracle::cn(store, q.src, q.dst, q.t, directed)) bad.add(where + " CN");
      if (!directed) {
        if (e.src_activity != oracle::activity(store, q.src, q.t)) bad.add(where + " src activity");
        if (e.dst_activity != oracle::activity(store, q.dst, q.t)) bad.add(where + " dst activity");
      } else if (e.src_activity.frequency != oracle::frequency(store, q.src, q.t)) {
        bad.add(where + " src frequency");
      }
      if (!eld_matches(e.eld_src, oracle::node_eld(store, q.src, q.t))) bad.add(where + " ELD src");
      if (!eld_matches(e.eld_dst, oracle::node_eld(store, q.dst, q.t))) bad.add(where + " ELD dst");
      if (!eld_matches(e.eld_pair, oracle::pair_eld(store, q.src, q.dst, q.t, directed))) bad.add(where + " ELD pair");
    }
  }
  if (!bad.empty()) return fail(bad.summary());
  return pass(fmt::format("{} graphs, {} queries, exact equality", kGraphs, queries));
}

Outcome dictionaries() {
  Mismatches bad;
  auto expect = [&](const DistributionDict& d, std::array<double, 7> want, const char* what) {
    if (d.buckets != want) bad.add(what);
    std::set<std::string> keys;
    const auto j = d.to_json();
    for (const auto& [k, v] : j["buckets"].items()) keys.insert(k);
    if (keys != std::set<std::string>{"=0", ">0", ">1", ">2", ">3", ">4", ">5"}) bad.add(std::string(what) + " keys");
  };
  const std::vector<double> pos = {2, 4, 0, 6}, neg = {0, 0, 1, 0}, zero = {0, 0, 0};
  expect(distribution_of(pos, Metric::hi, Polarity::positive), {0.25, 0.75, 0.75, 0.5, 0.5, 0.25, 0.25}, "HI positive");
  expect(distribution_of(neg, Metric::hi, Polarity::negative), {0.75, 0.25, 0, 0, 0, 0, 0}, "HI negative");
  expect(distribution_of(zero, Metric::cn, Polarity::positive), {1, 0, 0, 0, 0, 0, 0}, "all zero");

  auto hist = [](std::initializer_list<std::pair<LabelId, std::uint64_t>> v) {
    EdgeLabelDistribution d;
    for (auto [l, n] : v) d.add(l, n);
    return d;
  };
  const std::vector<PreferenceSample> worked = {
      {hist({{0, 3}, {1, 1}}), 0}, {hist({{0, 2}, {1, 2}}), 1}, {hist({{2, 5}}), 3}};
  const auto p = eld_preference(worked, EldScope::pair);
  const double third = 100.0 / 3;
  if (p.counted_samples != 3 || std::abs(p.top1 - third) > 1e-6 || std::abs(p.top2 - third) > 1e-6 || p.top3 != 0 ||
      std::abs(p.others - third) > 1e-6)
    bad.add("preference worked example");

  // Toy validation edge e4 has no pair history.
  TextTable n, t, l;
  for (NodeId i = 1; i <= 3; ++i) n.insert(i, "node");
  l.insert(0, "A");
  l.insert(1, "B");
  const auto toy = DyTagStore::build({{1, 2, 1, 0, std::nullopt}, {1, 2, 2, 0, std::nullopt}, {1, 3, 3, 1, std::nullopt},
                                      {2, 3, 4, 0, std::nullopt}, {1, 2, 5, 1, std::nullopt}},
                                     n, t, l, false);
  if (prepare_statistics(chronological_split(toy, 0.7, 0.15), 1).preference(EldScope::pair).counted_samples != 0)
    bad.add("toy pair preference should skip the empty history");

  // Percentage sums and bucket properties on random inputs.
  Rng rng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<PreferenceSample> s;
    for (std::size_t i = 0; i < 1 + rng.below(30); ++i) {
      EdgeLabelDistribution h;
      for (std::size_t k = 0; k < rng.below(5); ++k) h.add(static_cast<LabelId>(rng.below(6)), 1 + rng.below(4));
      s.push_back({h, static_cast<LabelId>(rng.below(7))});
    }
    const auto pr = eld_preference(s, EldScope::source);
    if (pr.counted_samples > 0 && std::abs(pr.top1 + pr.top2 + pr.top3 + pr.others - 100.0) > 1e-6)
      bad.add(fmt::format("percentages of trial {} do not sum to 100", trial));
    std::vector<double> v(1 + rng.below(40));
    for (auto& x : v) x = static_cast<double>(rng.below(10));
    const auto d = distribution_of(v, Metric::dnf, Polarity::negative);
    if (std::abs(d.buckets[0] + d.buckets[1] - 1.0) > 1e-12) bad.add("=0/>0 partition");
    for (std::size_t k = 2; k < 7; ++k)
      if (d.buckets[k] > d.buckets[k - 1]) bad.add("bucket monotonicity");
  }
  if (!bad.empty()) return fail(bad.summary());
  return pass("worked examples exact; 7 bucket keys; sums within 1e-6 over 2000 random sets");
}

bool oracle_clause(double lhs, CompareOp op, double rhs) {
  switch (op) {
    case CompareOp::lt: return lhs < rhs;
    case CompareOp::gt: return lhs > rhs;
    case CompareOp::le: return lhs <= rhs;
    case CompareOp::ge: return lhs >= rhs;
    case CompareOp::eq: return lhs == rhs;
  }
  return false;
}

double oracle_metric(const PairEvidence& e, Metric m) {
  switch (m) {
    case Metric::hi: return static_cast<double>(e.hi);
    case Metric::cn: return static_cast<double>(e.cn);
    case Metric::dnf: return static_cast<double>(e.dst_activity.frequency);
  }
  return 0;
}

Outcome recall_rank() {
  constexpr int kPools = 1000;
  Mismatches bad;
  Rng rng(4242);
  const CompareOp ops[] = {CompareOp::lt, CompareOp::gt, CompareOp::le, CompareOp::ge, CompareOp::eq};
  const Metric metrics[] = {Metric::hi, Metric::cn, Metric::dnf};
  const Significance levels[] = {Significance::extremely_significant, Significance::helpful,
                                 Significance::maybe_related, Significance::not_relevant};
  std::size_t capped = 0;
  for (int p = 0; p < kPools; ++p) {
    std::vector<PairEvidence> pool(1 + rng.below(101));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      pool[i].src = 1;
      pool[i].dst = static_cast<NodeId>(2 + i);
      pool[i].hi = rng.below(4);
      pool[i].cn = rng.below(4);
      pool[i].dst_activity.frequency = rng.below(9);
    }
    std::vector<ThresholdRule> rules(rng.below(3));
    for (auto& r : rules) {
      r.combinator = rng.below(2) ? Combinator::all : Combinator::any;
      r.clauses.resize(1 + rng.below(3));
      for (auto& c : r.clauses) c = {metrics[rng.below(3)], ops[rng.below(5)], static_cast<double>(rng.below(6))};
    }
    const auto set = apply_thresholds(1, 10, pool, rules);

    std::vector<NodeId> want_kept;
    for (const auto& e : pool) {
      bool excluded;
      if (rules.empty()) {
        excluded = !(e.hi > 0 || e.cn > 0);
      } else {
        excluded = false;
        for (const auto& r : rules) {
          bool all = true, any = false;
          for (const auto& c : r.clauses) {
            const bool ok = oracle_clause(oracle_metric(e, c.metric), c.op, c.value);
            all &= ok;
            any |= ok;
          }
          excluded |= r.combinator == Combinator::all ? all : any;
        }
      }
      if (!excluded) want_kept.push_back(e.dst);
    }
    std::vector<NodeId> kept;
    for (const auto& c : set.candidates) kept.push_back(c.node);
    if (kept != want_kept) bad.add(fmt::format("pool {} kept set", p));
    if (kept.size() + set.excluded.size() != pool.size()) bad.add(fmt::format("pool {} partition", p));

    GlobalLinkKnowledge k;
    for (Metric m : metrics)
      k.metrics[m] = {levels[rng.below(4)], "", rng.below(2) ? Favors::high : Favors::low, "", ""};
    const auto keys = rank_keys(&k);
    const auto ranked = rank_candidates(set, &k);
    if (ranked.candidates.size() != std::min<std::size_t>(kCandidateCap, set.candidates.size()))
      bad.add(fmt::format("pool {} cap", p));
    capped += set.candidates.size() > kCandidateCap;
    for (std::size_t i = 1; i < ranked.candidates.size(); ++i)
      if (!candidate_before(ranked.candidates[i - 1], ranked.candidates[i], keys))
        bad.add(fmt::format("pool {} order at {}", p, i));
    // Total order: exactly one direction between distinct candidates, transitive on a sample.
    const auto& c = set.candidates;
    for (std::size_t i = 0; i < std::min<std::size_t>(c.size(), 25); ++i)
      for (std::size_t j = 0; j < std::min<std::size_t>(c.size(), 25); ++j) {
        const bool ab = candidate_before(c[i], c[j], keys), ba = candidate_before(c[j], c[i], keys);
        if (i == j ? (ab || ba) : (ab == ba)) bad.add(fmt::format("pool {} totality {} {}", p, i, j));
        for (std::size_t m = 0; m < std::min<std::size_t>(c.size(), 10); ++m)
          if (ab && candidate_before(c[j], c[m], keys) && !candidate_before(c[i], c[m], keys))
            bad.add(fmt::format("pool {} transitivity", p));
      }
  }
  if (!bad.empty()) return fail(bad.summary());
  return pass(fmt::format("{} pools match the predicate oracle; {} pools exercised the cap of {}", kPools, capped,
                          kCandidateCap));
}

// Criterion 4 and 5 share these runs.
struct E2eRun {
  fs::path dir;
  std::map<std::string, std::string> files;
};
std::optional<std::vector<EvalReport>> g_reports;

nlohmann::json e2e_config() {
  return {{"edges", "data/edges.csv"},
          {"node_texts", "data/node_texts.csv"},
          {"edge_texts", "data/edge_texts.csv"},
          {"labels", "data/labels.csv"},
          {"dataset_name", "synthetic-500"},
          {"seed", 7},
          {"sample_count", 64},
          {"batch_size", 16},
          {"nr_negatives", 100}};
}

Outcome end_to_end(const fs::path& scratch) {
  const SyntheticOptions data{.nodes = 40, .edges = 500, .labels = 4, .seed = 7};
  std::vector<E2eRun> runs;
  for (int r = 0; r < 2; ++r) {
    E2eRun run;
    run.dir = scratch / fmt::format("e2e-{}", r);
    const fs::path d = run.dir / "data";
    export_dataset(generate_synthetic(data),
                   {d / "edges.csv", d / "node_texts.csv", d / "edge_texts.csv", d / "labels.csv"});
    auto j = e2e_config();
    j["workers"] = r == 0 ? 8 : 1;  // concurrency must not change outputs
    Pipeline p(config_in(run.dir, j));
    p.run();
    for (const char* f : {"predictions_lp.jsonl", "predictions_nr.jsonl", "predictions_ec.jsonl", "report_lp.json",
                          "report_nr.json", "report_ec.json", "knowledge.json"})
      run.files[f] = slurp(run.dir / "run" / f);
    g_stores.push_back(std::make_unique<DyTagStore>(p.store()));
    g_transcripts.push_back({run.dir / "run" / "transcript.jsonl", run.dir / "run", g_stores.back().get(), false});
    runs.push_back(std::move(run));
  }
  for (const auto& [name, content] : runs[0].files)
    if (content != runs[1].files.at(name)) return fail(name + " differs between the two runs");

  // Independent EdgeBank-style oracle: predict 1 iff the pair interacted
  // before t, or shares a neighbor when the knowledge lets the predictor see CN.
  const auto& store = *g_stores.front();
  const auto knowledge = KnowledgeStore::load(runs[0].dir / "run" / "knowledge.json");
  const auto items = included_link_items(*knowledge.global_link);
  const bool cn_visible = std::find(items.begin(), items.end(), KnowledgeItem::cn) != items.end();
  const auto records = read_predictions(runs[0].dir / "run" / "predictions_lp.jsonl");
  std::size_t correct = 0;
  for (const auto& r : records) {
    const bool link =
        oracle::hi(store, r.src, r.dst, r.t) > 0 || (cn_visible && oracle::cn(store, r.src, r.dst, r.t) > 0);
    correct += static_cast<int>(link) == r.truth_link;
  }
  const double want = static_cast<double>(correct) / static_cast<double>(records.size());
  const auto report = EvalReport::from_json(nlohmann::json::parse(runs[0].files.at("report_lp.json")));
  const double got = report.metrics.at("accuracy");
  if (std::abs(got - want) > 1e-12) return fail(fmt::format("LP accuracy {} vs oracle {}", got, want));

  std::vector<EvalReport> reports;
  for (const char* f : {"report_lp.json", "report_nr.json", "report_ec.json"})
    reports.push_back(EvalReport::from_json(nlohmann::json::parse(runs[0].files.at(f))));
  g_reports = reports;
  return pass(fmt::format("7 artifacts byte-identical across 2 runs; LP accuracy {:.6f} equals oracle (|diff| <= 1e-12, "
                          "CN {} to the predictor)",
                          got, cn_visible ? "visible" : "hidden"));
}

bool hits_monotone(const EvalReport& r) {
  return r.metrics.at("hits@1") <= r.metrics.at("hits@3") && r.metrics.at("hits@3") <= r.metrics.at("hits@10");
}

Outcome nr_scoring() {
  std::vector<PredictionRecord> recs;
  for (std::size_t rank : {1u, 2u, 11u, 102u}) {
    PredictionRecord r;
    r.task = Task::nr;
    r.pool_size = 101;
    r.positive_rank = rank;
    recs.push_back(r);
  }
  const auto rep = score_nr(recs);
  if (rep.metrics.at("hits@1") != 0.25 || rep.metrics.at("hits@3") != 0.5 || rep.metrics.at("hits@10") != 0.5)
    return fail(fmt::format("worked example gave {}", nlohmann::json(rep.metrics).dump()));
  std::size_t checked = 1;
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<PredictionRecord> rs(1 + rng.below(50));
    for (auto& r : rs) {
      r.task = Task::nr;
      r.pool_size = 101;
      r.positive_rank = 1 + rng.below(102);
    }
    if (!hits_monotone(score_nr(rs))) return fail(fmt::format("monotonicity broken in random trial {}", trial));
    ++checked;
  }
  if (g_reports) {
    const auto& nr = (*g_reports)[1];
    if (!hits_monotone(nr)) return fail("monotonicity broken in the end-to-end report");
    for (const auto& [batch, m] : nr.per_batch)
      if (!(m.at("hits@1") <= m.at("hits@3") && m.at("hits@3") <= m.at("hits@10")))
        return fail(fmt::format("monotonicity broken in batch {}", batch));
    ++checked;
  }
  return pass(fmt::format("ranks [1,2,11,102] -> 0.25/0.5/0.5 exactly; monotone on {} reports", checked));
}

WeightedScores reference_weighted(const std::vector<LabelId>& y, const std::vector<LabelId>& p) {
  // Per-class counts from a dense confusion matrix.
  LabelId k = 0;
  for (std::size_t i = 0; i < y.size(); ++i) k = std::max({k, y[i], p[i]});
  std::vector<std::vector<double>> cm(k + 1, std::vector<double>(k + 1, 0));
  for (std::size_t i = 0; i < y.size(); ++i) cm[y[i]][p[i]] += 1;
  WeightedScores w;
  for (LabelId c = 0; c <= k; ++c) {
    double support = 0, predicted = 0;
    for (LabelId d = 0; d <= k; ++d) support += cm[c][d], predicted += cm[d][c];
    const double tp = cm[c][c];
    const double pr = predicted ? tp / predicted : 0, re = support ? tp / support : 0;
    const double f = pr + re ? 2 * pr * re / (pr + re) : 0;
    const double weight = support / static_cast<double>(y.size());
    w.precision += weight * pr;
    w.recall += weight * re;
    w.f1 += weight * f;
  }
  return w;
}

Outcome ec_scoring() {
  std::vector<PredictionRecord> recs;
  for (LabelId truth : {0u, 0u, 0u, 1u}) {
    PredictionRecord r;
    r.task = Task::ec;
    r.truth_label = truth;
    r.predicted_label = 0;
    recs.push_back(r);
  }
  const double f1 = score_ec(recs).metrics.at("weighted_f1");
  if (std::abs(f1 - 0.643) > 1e-3) return fail(fmt::format("worked example weighted F1 {}", f1));
  Rng rng(61);
  double worst = 0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = 1 + rng.below(200), k = 1 + rng.below(8);
    std::vector<PredictionRecord> rs(n);
    std::vector<LabelId> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<LabelId>(rng.below(k));
      p[i] = rng.uniform() < 0.4 ? y[i] : static_cast<LabelId>(rng.below(k + 2));
      rs[i].task = Task::ec;
      rs[i].truth_label = y[i];
      rs[i].predicted_label = p[i];
    }
    const auto got = score_ec(rs).metrics;
    const auto want = reference_weighted(y, p);
    worst = std::max({worst, std::abs(got.at("weighted_precision") - want.precision),
                      std::abs(got.at("weighted_recall") - want.recall), std::abs(got.at("weighted_f1") - want.f1)});
  }
  if (worst > 1e-9) return fail(fmt::format("max deviation from the reference {:.3e}", worst));
  return pass(fmt::format("worked example {:.4f} (0.643 +- 1e-3); 100 random sets within {:.1e} of the reference", f1,
                          worst));
}

struct BenchmarkDataset {
  const char* name;
  std::size_t nodes, edges, categories, timestamps;
  bool bipartite;
  std::optional<double> pair, text;  // label consistency in percent; absent when omitted
};

const BenchmarkDataset kBenchmarkDatasets[] = {
    {"Enron", 42711, 797907, 10, 1006, false, 64.9, 68.6},
    {"GDELT", 6786, 1339245, 237, 2591, false, 29.4, 100.0},
    {"ICEWS1819", 31796, 1100071, 266, 730, false, 48.5, 100.0},
    {"Googlemap_CT", 674248, 1497006, 2, 4972, true, std::nullopt, 77.3},
    {"Stack_elec", 397702, 1262225, 2, 5224, true, 94.5, std::nullopt},
};

Outcome dtgb_statistics(const fs::path& scratch) {
  const char* root = std::getenv("DYTAG_DTGB_DIR");
  if (!root || !fs::is_directory(root)) return skip("DYTAG_DTGB_DIR is not set to a dataset directory");
  Mismatches bad;
  std::vector<std::string> checked, missing;
  for (const auto& ds : kBenchmarkDatasets) {
    const fs::path dir = fs::path(root) / ds.name;
    if (!fs::is_directory(dir)) {
      missing.push_back(ds.name);
      continue;
    }
    const auto started = std::chrono::steady_clock::now();
    DatasetFiles files{dir / "edges.csv", dir / "node_texts.csv", dir / "edge_texts.csv", dir / "labels.csv"};
    if (!fs::exists(files.edges)) files = import_dtgb(dir, scratch / ds.name);
    const auto store = ingest_dataset(files, ds.bipartite);
    std::set<Timestamp> stamps;
    for (const auto& e : store.edges()) stamps.insert(e.ts);
    if (store.num_nodes() != ds.nodes) bad.add(fmt::format("{} nodes {} vs {}", ds.name, store.num_nodes(), ds.nodes));
    if (store.num_edges() != ds.edges) bad.add(fmt::format("{} edges {} vs {}", ds.name, store.num_edges(), ds.edges));
    if (store.num_labels() != ds.categories)
      bad.add(fmt::format("{} categories {} vs {}", ds.name, store.num_labels(), ds.categories));
    if (stamps.size() != ds.timestamps)
      bad.add(fmt::format("{} timestamps {} vs {}", ds.name, stamps.size(), ds.timestamps));

    const auto coverage = pareto_coverage(chronological_split(store, 0.7, 0.15), 0.10);
    if (!(coverage.coverage_all > 0.70)) bad.add(fmt::format("{} pareto coverage {:.3f}", ds.name, coverage.coverage_all));

    const auto cons = label_consistency(store);
    auto check = [&](const char* kind, std::optional<double> got, std::optional<double> want) {
      if (!want) {
        if (got) bad.add(fmt::format("{} {} consistency should be omitted, got {:.1f}", ds.name, kind, *got * 100));
      } else if (!got || std::abs(*got * 100 - *want) > 0.5) {
        bad.add(fmt::format("{} {} consistency {} vs {:.1f}", ds.name, kind,
                            got ? fmt::format("{:.2f}", *got * 100) : "absent", *want));
      }
    };
    check("pair", cons.pair_consistency, ds.pair);
    check("text", cons.text_consistency, ds.text);
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (secs > 600) bad.add(fmt::format("{} took {:.0f} s", ds.name, secs));
    checked.push_back(ds.name);
  }
  if (checked.empty()) return skip(fmt::format("no benchmark datasets found under {}", root));
  if (!bad.empty()) return fail(bad.summary());
  std::string detail = fmt::format("stats, coverage and consistency match for {}", fmt::join(checked, ", "));
  if (!missing.empty()) detail += fmt::format("; not present: {}", fmt::join(missing, ", "));
  return pass(detail);
}

Outcome replay_regression(const fs::path& scratch) {
  const fs::path fixture = fs::path(DYTAG_FIXTURE_DIR) / "replay";
  if (!fs::exists(fixture / "recorded.jsonl")) return fail("replay fixture missing at " + fixture.string());
  const fs::path work = scratch / "replay";
  fs::create_directories(work);
  for (const char* item : {"data", "config.json", "recorded.jsonl"})
    fs::copy(fixture / item, work / item, fs::copy_options::recursive);
  Pipeline p(load_config(work / "config.json"));
  p.run();
  std::vector<std::string> compared;
  for (const auto& entry : fs::directory_iterator(fixture / "expected")) {
    const auto name = entry.path().filename().string();
    if (slurp(entry.path()) != slurp(work / "run" / name)) return fail(name + " differs from the recorded fixture");
    compared.push_back(name);
  }
  g_stores.push_back(std::make_unique<DyTagStore>(p.store()));
  g_transcripts.push_back({work / "run" / "transcript.jsonl", work / "run", g_stores.back().get(), false});
  return pass(fmt::format("{} artifacts byte-identical to the fixture", compared.size()));
}

/// Extra runs so every prompt mode and the edge-text variant reach the hygiene check.
void mode_runs(const fs::path& scratch) {
  const SyntheticOptions data{.nodes = 30, .edges = 300, .labels = 3, .seed = 21};
  const std::vector<std::pair<std::string, bool>> modes = {
      {"text", false}, {"text-fewshot", false}, {"structure", false}, {"structure-fewshot", false}, {"gad", true}};
  for (const auto& [mode, edge_text] : modes) {
    const fs::path dir = scratch / ("mode-" + mode);
    const fs::path d = dir / "data";
    export_dataset(generate_synthetic(data),
                   {d / "edges.csv", d / "node_texts.csv", d / "edge_texts.csv", d / "labels.csv"});
    auto j = e2e_config();
    j["mode"] = mode;
    j["use_edge_text"] = edge_text;
    j["sample_count"] = 32;
    j["nr_negatives"] = 30;
    Pipeline p(config_in(dir, j));
    p.run();
    g_stores.push_back(std::make_unique<DyTagStore>(p.store()));
    g_transcripts.push_back({dir / "run" / "transcript.jsonl", dir / "run", g_stores.back().get(), edge_text});
  }
}

Outcome prompt_hygiene(const fs::path& scratch) {
  mode_runs(scratch);
  std::size_t prompts = 0, transcripts = 0;
  Mismatches leaks;
  for (const auto& src : g_transcripts) {
    std::map<std::string, std::pair<const PredictionRecord*, bool>> owner;
    std::vector<std::vector<PredictionRecord>> held;
    for (const char* task : {"lp", "nr", "ec"}) {
      const auto path = src.run_dir / fmt::format("predictions_{}.jsonl", task);
      if (fs::exists(path)) held.push_back(read_predictions(path));
    }
    for (const auto& recs : held)
      for (const auto& r : recs)
        for (const auto& d : r.digests) owner[d] = {&r, src.use_edge_text};
    for (const auto& rec : read_transcript(src.transcript)) {
      auto it = owner.find(rec.request_digest);
      if (it == owner.end()) continue;  // agent calls carry no query truth
      ++prompts;
      const auto truth = truth_of(*it->second.first, *src.store, it->second.second);
      for (const auto& m : rec.request.messages) {
        if (m.role != "user") continue;
        if (auto leak = find_leak(m.content, truth)) leaks.add(src.transcript.string() + ": " + *leak);
        break;  // re-asks repeat the same first user message
      }
    }
    ++transcripts;
  }
  if (!leaks.empty()) return fail(leaks.summary());
  if (prompts == 0) return fail("no predictor prompts found");
  return pass(fmt::format("{} predictor prompts across {} transcripts (all 5 modes, edge-text variant) are leak-free",
                          prompts, transcripts));
}

Outcome bipartite_cn() {
  const auto store = generate_synthetic({.nodes = 200, .edges = 5000, .labels = 3, .seed = 10, .bipartite = true});
  const auto pool = negative_pool(store);
  const std::set<NodeId> dst(pool.begin(), pool.end());
  std::vector<NodeId> src;
  for (NodeId n = 1; n <= 200; ++n)
    if (!dst.count(n)) src.push_back(n);
  Rng rng(10);
  const double horizon = store.edges().back().ts + 1;
  std::vector<PairQuery> qs;
  for (int i = 0; i < 10000; ++i)
    qs.push_back({src[rng.below(src.size())], pool[rng.below(pool.size())], rng.uniform() * horizon, std::nullopt});
  std::sort(qs.begin(), qs.end(), [](const PairQuery& a, const PairQuery& b) { return a.t < b.t; });
  std::size_t nonzero = 0, with_history = 0;
  for (const auto& e : batch_evidence(store, qs)) {
    nonzero += e.cn != 0;
    with_history += e.src_activity.frequency > 0 && e.dst_activity.frequency > 0;
  }
  for (std::size_t i = 0; i < 200; ++i) nonzero += common_neighbor_count(store, qs[i].src, qs[i].dst, qs[i].t) != 0;
  if (nonzero) return fail(fmt::format("{} queries with nonzero CN", nonzero));
  return pass(fmt::format("10000 cross-partition queries, CN = 0 throughout ({} with both endpoints active)",
                          with_history));
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  Scratch scratch("run");
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", metric_oracle},
      {2, "distribution and preference dictionaries", dictionaries},
      {3, "recall and ranking", recall_rank},
      {4, "end-to-end determinism", [&] { return end_to_end(scratch.path()); }},
      {5, "node retrieval scoring", nr_scoring},
      {6, "edge classification scoring", ec_scoring},
      {7, "benchmark dataset statistics", [&] { return dtgb_statistics(scratch.path()); }},
      {8, "replay regression", [&] { return replay_regression(scratch.path()); }},
      {9, "prompt hygiene", [&] { return prompt_hygiene(scratch.path()); }},
      {10, "bipartite common neighbors", bipartite_cn},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto started = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const char* word = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    failures += o.status == Status::fail;
    std::cout << fmt::format("{} AC{:02} {}: {} [{:.1f} s]", word, c.id, c.name, o.detail, secs) << std::endl;
  }
  return failures ? 1 : 0;
}
