#include <gtest/gtest.h>

#include "dytag/error.hpp"
#include "dytag/eval.hpp"
#include "dytag/rng.hpp"
#include "support.hpp"

using namespace dytag;
using namespace dytag::testing;

namespace {

PredictionRecord lp(int truth, int pred, std::size_t batch = 0) {
  PredictionRecord r;
  r.task = Task::lp;
  r.truth_link = truth;
  r.predicted_link = pred;
  r.batch = batch;
  return r;
}

PredictionRecord nr(std::size_t rank) {
  PredictionRecord r;
  r.task = Task::nr;
  r.pool_size = 101;
  r.positive_rank = rank;
  return r;
}

PredictionRecord ec(LabelId truth, LabelId pred) {
  PredictionRecord r;
  r.task = Task::ec;
  r.truth_label = truth;
  r.predicted_label = pred;
  return r;
}

/// Confusion-matrix formulation, independent of the library's code path.
WeightedScores reference_prf(const std::vector<LabelId>& y, const std::vector<LabelId>& p) {
  std::map<LabelId, std::map<LabelId, double>> cm;
  std::set<LabelId> classes;
  for (std::size_t i = 0; i < y.size(); ++i) {
    cm[y[i]][p[i]] += 1;
    classes.insert(y[i]);
    classes.insert(p[i]);
  }
  WeightedScores out;
  const double n = static_cast<double>(y.size());
  for (LabelId c : classes) {
    double tp = cm[c][c], support = 0, predicted = 0;
    for (LabelId d : classes) {
      support += cm[c][d];
      predicted += cm[d][c];
    }
    const double prec = predicted > 0 ? tp / predicted : 0;
    const double rec = support > 0 ? tp / support : 0;
    const double f = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
    out.precision += support / n * prec;
    out.recall += support / n * rec;
    out.f1 += support / n * f;
  }
  return out;
}

}  // namespace

TEST(ScoreLp, Accuracy) {
  const std::vector<PredictionRecord> all = {lp(1, 1), lp(0, 0)};
  EXPECT_EQ(score_lp(all).metrics.at("accuracy"), 1.0);
  const std::vector<PredictionRecord> half = {lp(1, 1), lp(0, 1), lp(1, 0), lp(0, 0)};
  EXPECT_EQ(score_lp(half).metrics.at("accuracy"), 0.5);
  EXPECT_THROW(score_lp({}), UsageError);
  const std::vector<PredictionRecord> wrong = {ec(0, 0)};
  EXPECT_THROW(score_lp(wrong), UsageError);
}

TEST(ScoreLp, PerBatchOnlyWithSeveralBatches) {
  const std::vector<PredictionRecord> one = {lp(1, 1), lp(0, 1)};
  EXPECT_TRUE(score_lp(one).per_batch.empty());
  const std::vector<PredictionRecord> two = {lp(1, 1, 0), lp(0, 1, 0), lp(1, 1, 1), lp(0, 0, 1)};
  const auto r = score_lp(two);
  ASSERT_EQ(r.per_batch.size(), 2u);
  EXPECT_EQ(r.per_batch.at(0).at("accuracy"), 0.5);
  EXPECT_EQ(r.per_batch.at(1).at("accuracy"), 1.0);
}

TEST(ScoreNr, HitsAtK) {
  const std::vector<PredictionRecord> r = {nr(1), nr(2), nr(11), nr(102)};
  const auto rep = score_nr(r);
  EXPECT_EQ(rep.metrics.at("hits@1"), 0.25);
  EXPECT_EQ(rep.metrics.at("hits@3"), 0.5);
  EXPECT_EQ(rep.metrics.at("hits@10"), 0.5);
  const std::vector<PredictionRecord> first = {nr(1), nr(1)};
  for (const auto& [k, v] : score_nr(first).metrics) EXPECT_EQ(v, 1.0) << k;
  const std::vector<PredictionRecord> miss = {nr(102)};
  for (const auto& [k, v] : score_nr(miss).metrics) EXPECT_EQ(v, 0.0) << k;
  // A tie at the top with one negative gives rank 2.
  const std::vector<PredictionRecord> tie = {nr(2)};
  EXPECT_EQ(score_nr(tie).metrics.at("hits@1"), 0.0);
  EXPECT_EQ(score_nr(tie).metrics.at("hits@3"), 1.0);
  EXPECT_THROW(score_nr({}), UsageError);
}

TEST(ScoreEc, WorkedExample) {
  const std::vector<PredictionRecord> r = {ec(0, 0), ec(0, 0), ec(0, 0), ec(1, 0)};
  const auto rep = score_ec(r);
  EXPECT_NEAR(rep.metrics.at("weighted_f1"), 0.643, 1e-3);
  EXPECT_NEAR(rep.metrics.at("weighted_f1"), (3 * (6.0 / 7)) / 4, 1e-12);
  EXPECT_NEAR(rep.metrics.at("weighted_recall"), 0.75, 1e-12);
  EXPECT_NEAR(rep.metrics.at("weighted_precision"), 0.5625, 1e-12);
  const std::vector<PredictionRecord> perfect = {ec(0, 0), ec(1, 1)};
  for (const auto& [k, v] : score_ec(perfect).metrics) EXPECT_EQ(v, 1.0) << k;
}

TEST(ScoreEc, MatchesReferenceOnRandomSets) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(80), k = 1 + rng.below(6);
    std::vector<LabelId> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<LabelId>(rng.below(k));
      p[i] = rng.uniform() < 0.5 ? y[i] : static_cast<LabelId>(rng.below(k + 1));
    }
    const auto got = weighted_prf(y, p);
    const auto want = reference_prf(y, p);
    EXPECT_NEAR(got.precision, want.precision, 1e-9);
    EXPECT_NEAR(got.recall, want.recall, 1e-9);
    EXPECT_NEAR(got.f1, want.f1, 1e-9);
    // Weighted recall is plain accuracy.
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += y[i] == p[i];
    EXPECT_NEAR(got.recall, acc / static_cast<double>(n), 1e-12);
  }
  // Balanced two-class set, always predicting the wrong single class.
  const std::vector<LabelId> y = {0, 0, 1, 1}, p = {1, 1, 1, 1};
  EXPECT_NEAR(weighted_prf(y, p).f1, reference_prf(y, p).f1, 1e-12);
}

TEST(Report, JsonRoundTripAndText) {
  const std::vector<PredictionRecord> r = {nr(1), nr(2), nr(11), nr(102)};
  auto rep = score_nr(r);
  rep.dataset = "toy";
  rep.config_digest = "abc";
  EXPECT_EQ(EvalReport::from_json(rep.to_json()), rep);
  const auto text = rep.render_text();
  EXPECT_NE(text.find("25.00"), std::string::npos);
  EXPECT_LT(text.find("hits@3"), text.find("hits@10"));
}

TEST(Consistency, HandComputedPairs) {
  TextTable n, t, l;
  for (NodeId i = 1; i <= 3; ++i) n.insert(i, "n");
  l.insert(0, "A");
  l.insert(1, "B");
  t.insert(0, "same words");
  t.insert(1, "other");
  t.insert(2, "same words");
  const auto s = DyTagStore::build({{1, 2, 1, 0, 0}, {2, 1, 2, 0, 2}, {1, 2, 3, 1, 1}, {2, 3, 4, 0, std::nullopt}},
                                   n, t, l, false);
  const auto rep = label_consistency(s);
  ASSERT_TRUE(rep.pair_consistency);
  EXPECT_NEAR(*rep.pair_consistency, 2.0 / 3, 1e-12);
  EXPECT_NEAR(rep.repeated_pair_fraction, 0.75, 1e-12);
  ASSERT_TRUE(rep.text_consistency);
  EXPECT_EQ(*rep.text_consistency, 1.0);

  ConsistencyOptions directed;
  directed.directed = true;
  const auto d = label_consistency(s, directed);
  ASSERT_TRUE(d.pair_consistency);
  EXPECT_EQ(*d.pair_consistency, 0.5);
}

TEST(Consistency, AbsentWhenRepeatsAreRare) {
  TextTable n, t, l;
  for (NodeId i = 1; i <= 30; ++i) n.insert(i, "n");
  l.insert(0, "A");
  std::vector<TemporalEdge> e;
  for (NodeId i = 1; i < 30; ++i) e.push_back({i, i + 1, static_cast<double>(i), 0, std::nullopt});
  e.push_back({1, 2, 100, 0, std::nullopt});
  const auto s = DyTagStore::build(std::move(e), n, t, l, false);
  const auto rep = label_consistency(s);
  EXPECT_FALSE(rep.pair_consistency);
  EXPECT_FALSE(rep.text_consistency);
  ConsistencyOptions lax;
  lax.min_fraction_repeated = 0.0;
  EXPECT_EQ(label_consistency(s, lax).pair_consistency, 1.0);
}

TEST(Consistency, ToySplitRange) {
  const auto s = toy_store();
  const auto rep = label_consistency(s);
  ASSERT_TRUE(rep.pair_consistency);
  // (1,2): A,A,B  (1,3): B  (2,3): A
  EXPECT_NEAR(*rep.pair_consistency, 2.0 / 3, 1e-12);
  ConsistencyOptions train;
  train.end = 3;
  EXPECT_EQ(label_consistency(s, train).pair_consistency, 1.0);
}

TEST(Pareto, FullFractionCoversEverything) {
  const auto s = generate_synthetic({.nodes = 50, .edges = 500, .labels = 2, .seed = 1});
  const auto sp = chronological_split(s, 0.7, 0.15);
  const auto all = pareto_coverage(sp, 1.0);
  EXPECT_GE(all.coverage_all, 0.0);
  EXPECT_LE(all.coverage_all, 1.0);
  // Nodes first seen in the test split are not selectable, so compare to the oracle.
  std::set<NodeId> active;
  for (const auto& e : s.edges().subspan(0, sp.valid_end)) active.insert(e.src), active.insert(e.dst);
  std::size_t covered = 0;
  for (const auto& e : s.edges()) covered += active.count(e.src) || active.count(e.dst);
  EXPECT_NEAR(all.coverage_all, static_cast<double>(covered) / 500.0, 1e-12);
  EXPECT_FALSE(pareto_coverage(sp, 0.1).render_text().empty());
}
