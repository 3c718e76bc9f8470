#include <gtest/gtest.h>

#include "dytag/error.hpp"
#include "dytag/graph_store.hpp"
#include "support.hpp"

using namespace dytag;
using namespace dytag::testing;

TEST(GraphStore, IngestsToyFixture) {
  const auto s = ingest_dataset(toy_files(), false);
  EXPECT_EQ(s.num_nodes(), 3u);
  EXPECT_EQ(s.num_edges(), 5u);
  EXPECT_EQ(s.num_labels(), 2u);
  EXPECT_EQ(s.node_text(1), "alice");
  EXPECT_EQ(s.edge_text(s.edge(4)), "gas contract pricing");
  EXPECT_EQ(s.label_text(s.edge(2).label), "B");
}

TEST(GraphStore, UnsortedInputIsStablySorted) {
  TempDir dir;
  spit(dir / "edges.csv", "src,dst,ts,label,text_id\n1,2,5,0,\n2,1,1,1,\n1,2,1,0,\n");
  spit(dir / "nodes.csv", "node_id,text\n1,a\n2,b\n");
  spit(dir / "texts.csv", "text_id,text\n");
  spit(dir / "labels.csv", "label_id,text\n0,x\n1,y\n");
  const auto s = ingest_dataset({dir / "edges.csv", dir / "nodes.csv", dir / "texts.csv", dir / "labels.csv"}, false);
  ASSERT_EQ(s.num_edges(), 3u);
  EXPECT_EQ(s.edge(0).src, 2u);  // first of the two ts=1 rows in file order
  EXPECT_EQ(s.edge(1).src, 1u);
  EXPECT_EQ(s.edge(2).ts, 5);
}

TEST(GraphStore, DanglingNodeNamesFileAndLine) {
  TempDir dir;
  spit(dir / "edges.csv", "src,dst,ts,label,text_id\n1,2,1,0,\n1,9,2,0,\n");
  spit(dir / "nodes.csv", "node_id,text\n1,a\n2,b\n");
  spit(dir / "texts.csv", "text_id,text\n");
  spit(dir / "labels.csv", "label_id,text\n0,x\n");
  try {
    ingest_dataset({dir / "edges.csv", dir / "nodes.csv", dir / "texts.csv", dir / "labels.csv"}, false);
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("edges.csv"), std::string::npos) << msg;
    EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
  }
}

TEST(GraphStore, MalformedRowsAndEmptyFilesAreErrors) {
  TempDir dir;
  spit(dir / "nodes.csv", "node_id,text\n1,a\n2,b\n");
  spit(dir / "texts.csv", "text_id,text\n");
  spit(dir / "labels.csv", "label_id,text\n0,x\n");
  const DatasetFiles f{dir / "edges.csv", dir / "nodes.csv", dir / "texts.csv", dir / "labels.csv"};
  spit(f.edges, "src,dst,ts,label,text_id\n1,2,abc,0,\n");
  EXPECT_THROW(ingest_dataset(f, false), IngestError);
  spit(f.edges, "src,dst,ts,label,text_id\n1,2,1,0\n");
  EXPECT_THROW(ingest_dataset(f, false), IngestError);
  spit(f.edges, "src,dst,ts,label,text_id\n");
  EXPECT_THROW(ingest_dataset(f, false), IngestError);
  spit(f.edges, "src,dst,ts,label,text_id\n1,2,1,7,\n");
  EXPECT_THROW(ingest_dataset(f, false), IngestError);
}

TEST(GraphStore, ExportRoundTrip) {
  TempDir dir;
  const auto a = toy_store();
  const DatasetFiles f{dir / "e.csv", dir / "n.csv", dir / "t.csv", dir / "l.csv"};
  export_dataset(a, f);
  const auto b = ingest_dataset(f, false);
  ASSERT_EQ(a.num_edges(), b.num_edges());
  for (std::size_t i = 0; i < a.num_edges(); ++i) EXPECT_EQ(a.edge(i), b.edge(i));
  EXPECT_EQ(a.node_texts(), b.node_texts());
  EXPECT_EQ(a.edge_texts(), b.edge_texts());
  EXPECT_EQ(a.labels(), b.labels());
}

TEST(GraphStore, ExportQuotesTextsWithCommasAndNewlines) {
  TempDir dir;
  TextTable nodes, texts, labels;
  nodes.insert(1, "a, \"quoted\"");
  nodes.insert(2, "line\nbreak");
  texts.insert(0, "x,y");
  labels.insert(0, "L");
  const auto s = DyTagStore::build({{1, 2, 1, 0, 0}, {2, 1, 2, 0, 0}, {1, 2, 3, 0, std::nullopt}}, nodes, texts, labels,
                                   false);
  const DatasetFiles f{dir / "e.csv", dir / "n.csv", dir / "t.csv", dir / "l.csv"};
  export_dataset(s, f);
  const auto r = ingest_dataset(f, false);
  EXPECT_EQ(r.node_text(1), "a, \"quoted\"");
  EXPECT_EQ(r.node_text(2), "line\nbreak");
  EXPECT_EQ(r.edge_text(r.edge(0)), "x,y");
  EXPECT_EQ(r.edge_text(r.edge(2)), "");
}

TEST(GraphStore, BinaryCacheRoundTrip) {
  TempDir dir;
  const auto a = generate_synthetic({.nodes = 30, .edges = 300, .labels = 5, .seed = 3});
  save_store(a, dir / "s.bin");
  const auto b = load_store(dir / "s.bin");
  ASSERT_EQ(a.num_edges(), b.num_edges());
  for (std::size_t i = 0; i < a.num_edges(); ++i) EXPECT_EQ(a.edge(i), b.edge(i));
  EXPECT_EQ(a.node_texts(), b.node_texts());
  spit(dir / "bad.bin", "not a store");
  EXPECT_THROW(load_store(dir / "bad.bin"), Error);
}

TEST(GraphStore, ToySplitUsesFloor) {
  const auto s = toy_store();
  const auto sp = chronological_split(s, 0.7, 0.15);
  EXPECT_EQ(sp.train_end, 3u);
  EXPECT_EQ(sp.valid_end, 4u);
  EXPECT_EQ(sp.test().size(), 1u);
  EXPECT_EQ(sp.test()[0].ts, 5);
}

TEST(GraphStore, HundredEdgeSplitBoundaries) {
  const auto s = generate_synthetic({.nodes = 20, .edges = 100, .labels = 2, .seed = 1});
  const auto sp = chronological_split(s, 0.7, 0.15);
  EXPECT_EQ(sp.train_end, 70u);
  EXPECT_EQ(sp.valid_end, 85u);
}

TEST(GraphStore, SplitRejectsTinyStoresAndBadFractions) {
  TextTable n, t, l;
  n.insert(1, "a");
  n.insert(2, "b");
  l.insert(0, "x");
  const auto s = DyTagStore::build({{1, 2, 1, 0, std::nullopt}, {1, 2, 2, 0, std::nullopt}}, n, t, l, false);
  EXPECT_THROW(chronological_split(s, 0.7, 0.15), UsageError);
  EXPECT_THROW(chronological_split(toy_store(), 0.9, 0.2), UsageError);
}

TEST(GraphStore, EvalWindowClampsAndBatches) {
  const auto toy = toy_store();
  const auto sp = chronological_split(toy, 0.7, 0.15);
  const auto one = select_eval_window(sp, 1, 256);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].begin, 4u);
  EXPECT_EQ(one[0].end, 5u);
  EXPECT_EQ(select_eval_window(sp, 10240, 256).size(), 1u);

  const auto s = generate_synthetic({.nodes = 50, .edges = 1000, .labels = 3, .seed = 2});
  const auto big = chronological_split(s, 0.7, 0.15);  // 150 test edges
  const auto w = select_eval_window(big, 100, 32);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w[0].begin, 850u);
  EXPECT_EQ(w[3].end, 950u);
  EXPECT_EQ(w[3].size(), 4u);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i].index, i);
}

TEST(GraphStore, NeighborsBefore) {
  const auto s = toy_store();
  EXPECT_EQ(neighbors_before(s, 1, 5), (std::vector<NodeId>{2, 3}));
  EXPECT_TRUE(neighbors_before(s, 3, 3).empty());
  EXPECT_EQ(neighbors_before(s, 2, 5), (std::vector<NodeId>{1, 3}));
  EXPECT_TRUE(neighbors_before(s, 99, 5).empty());
  EXPECT_EQ(neighbors_before(s, 2, 5, Direction::directed), (std::vector<NodeId>{3}));
}

TEST(GraphStore, NeighborSetsGrowWithTime) {
  const auto s = generate_synthetic({.nodes = 25, .edges = 200, .labels = 3, .seed = 9});
  for (NodeId n : s.node_ids()) {
    std::vector<NodeId> prev;
    for (double t = 0; t <= s.edges().back().ts + 1; t += 7) {
      const auto cur = neighbors_before(s, n, t);
      EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
  }
}

TEST(GraphStore, IncidenceListsCoverEveryEdge) {
  const auto s = generate_synthetic({.nodes = 25, .edges = 300, .labels = 3, .seed = 4});
  std::size_t out = 0, in = 0;
  for (NodeId n : s.node_ids()) {
    out += s.out_edges(n).size();
    in += s.in_edges(n).size();
  }
  EXPECT_EQ(out, s.num_edges());
  EXPECT_EQ(in, s.num_edges());
}

TEST(GraphStore, LabelLookupAndModalLabel) {
  const auto s = toy_store();
  EXPECT_EQ(s.find_label("  a "), 0u);
  EXPECT_EQ(s.find_label("B"), 1u);
  EXPECT_FALSE(s.find_label("C").has_value());
  EXPECT_EQ(s.modal_label(4), 0u);
  EXPECT_FALSE(s.modal_label(0).has_value());
}

TEST(GraphStore, BipartiteNegativePoolIsDestinationSide) {
  const auto s = generate_synthetic({.nodes = 20, .edges = 200, .labels = 2, .seed = 5, .bipartite = true});
  for (NodeId v : s.destination_nodes()) EXPECT_GT(v, 10u);
  for (const auto& e : s.edges()) {
    EXPECT_LE(e.src, 10u);
    EXPECT_GT(e.dst, 10u);
  }
}

namespace {

void write_dtgb(const std::filesystem::path& d, bool with_label_text) {
  spit(d / "edge_list.csv", "u,i,ts,label,r\n1,2,1,0,0\n1,3,2,1,1\n2,3,3,0,2\n");
  spit(d / "entity_text.csv", "i,text\n1,alpha\n2,\"beta, inc\"\n3,gamma\n");
  spit(d / "relation_text.csv", "i,text\n0,hello\n1,\"multi\nline\"\n2,bye\n");
  if (with_label_text) spit(d / "label_text.csv", "i,text\n0,spam\n1,ham\n");
}

}  // namespace

TEST(GraphStore, ImportsDtgbLayout) {
  TempDir dir;
  write_dtgb(dir / "raw", true);
  const auto files = import_dtgb(dir / "raw", dir / "out");
  const auto s = ingest_dataset(files, false);
  EXPECT_EQ(s.num_nodes(), 3u);
  EXPECT_EQ(s.num_edges(), 3u);
  EXPECT_EQ(s.num_labels(), 2u);
  EXPECT_EQ(s.node_text(2), "beta, inc");
  EXPECT_EQ(s.edge_text(s.edge(1)), "multi\nline");
  EXPECT_EQ(s.label_text(s.edge(1).label), "ham");
}

TEST(GraphStore, DtgbLabelsFallBackToIds) {
  TempDir dir;
  write_dtgb(dir / "raw", false);
  const auto s = ingest_dataset(import_dtgb(dir / "raw", dir / "out"), false);
  EXPECT_EQ(s.num_labels(), 2u);
  EXPECT_EQ(s.label_text(s.edge(0).label), "0");
  EXPECT_EQ(s.label_text(s.edge(1).label), "1");
}

TEST(GraphStore, DtgbMissingColumnIsAnError) {
  TempDir dir;
  spit(dir / "raw" / "edge_list.csv", "src,i,ts,label\n1,2,1,0\n");
  EXPECT_THROW(import_dtgb(dir / "raw", dir / "out"), IngestError);
}
