#include "dytag/graph_store.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "dytag/csv.hpp"
#include "dytag/error.hpp"

namespace dytag {

// ---------------------------------------------------------------------------
// TextTable

bool TextTable::insert(std::uint32_t id, std::string text) {
  if (id >= present_.size()) {
    present_.resize(static_cast<std::size_t>(id) + 1, false);
    texts_.resize(static_cast<std::size_t>(id) + 1);
  }
  if (present_[id]) return false;
  present_[id] = true;
  texts_[id] = std::move(text);
  ++count_;
  return true;
}

const std::string& TextTable::at(std::uint32_t id) const {
  if (!contains(id)) throw UsageError("unregistered id " + std::to_string(id));
  return texts_[id];
}

std::vector<std::uint32_t> TextTable::ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(count_);
  for (std::uint32_t i = 0; i < present_.size(); ++i)
    if (present_[i]) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// DyTagStore

DyTagStore DyTagStore::build(std::vector<TemporalEdge> edges, TextTable node_texts,
                             TextTable edge_texts, TextTable labels, bool bipartite) {
  if (edges.empty()) throw IngestError("edge list is empty");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (!node_texts.contains(e.src) || !node_texts.contains(e.dst))
      throw IngestError("edge #" + std::to_string(i) + " references an unregistered node");
    if (!labels.contains(e.label))
      throw IngestError("edge #" + std::to_string(i) + " references an unregistered label");
    if (e.text_id && !edge_texts.contains(*e.text_id))
      throw IngestError("edge #" + std::to_string(i) + " references an unregistered edge text");
    if (!(e.ts >= 0) || !std::isfinite(e.ts))
      throw IngestError("edge #" + std::to_string(i) + " has an invalid timestamp");
  }

  DyTagStore s;
  std::stable_sort(edges.begin(), edges.end(),
                   [](const TemporalEdge& a, const TemporalEdge& b) { return a.ts < b.ts; });
  s.edges_ = std::move(edges);
  s.node_texts_ = std::move(node_texts);
  s.edge_texts_ = std::move(edge_texts);
  s.labels_ = std::move(labels);
  s.bipartite_ = bipartite;

  const std::size_t bound = s.node_texts_.bound();
  s.out_offsets_.assign(bound + 1, 0);
  s.in_offsets_.assign(bound + 1, 0);
  for (const auto& e : s.edges_) {
    ++s.out_offsets_[e.src + 1];
    ++s.in_offsets_[e.dst + 1];
  }
  for (std::size_t i = 1; i <= bound; ++i) {
    s.out_offsets_[i] += s.out_offsets_[i - 1];
    s.in_offsets_[i] += s.in_offsets_[i - 1];
  }
  s.out_index_.resize(s.edges_.size());
  s.in_index_.resize(s.edges_.size());
  std::vector<std::size_t> out_fill(s.out_offsets_.begin(), s.out_offsets_.end() - 1);
  std::vector<std::size_t> in_fill(s.in_offsets_.begin(), s.in_offsets_.end() - 1);
  for (EdgeIndex i = 0; i < s.edges_.size(); ++i) {
    s.out_index_[out_fill[s.edges_[i].src]++] = i;
    s.in_index_[in_fill[s.edges_[i].dst]++] = i;
  }
  return s;
}

std::string_view DyTagStore::node_text(NodeId n) const {
  return node_texts_.contains(n) ? std::string_view(node_texts_.at(n)) : std::string_view{};
}

std::string_view DyTagStore::edge_text(const TemporalEdge& e) const {
  if (!e.text_id || !edge_texts_.contains(*e.text_id)) return {};
  return edge_texts_.at(*e.text_id);
}

std::string_view DyTagStore::label_text(LabelId l) const {
  return labels_.contains(l) ? std::string_view(labels_.at(l)) : std::string_view{};
}

namespace {

std::string normalize_label(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(first, last - first + 1));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::optional<LabelId> DyTagStore::find_label(std::string_view text) const {
  const std::string wanted = normalize_label(text);
  if (wanted.empty()) return std::nullopt;
  for (LabelId id : labels_.ids())
    if (normalize_label(labels_.at(id)) == wanted) return id;
  return std::nullopt;
}

std::span<const EdgeIndex> DyTagStore::out_edges(NodeId n) const {
  if (n + std::size_t{1} >= out_offsets_.size()) return {};
  return std::span<const EdgeIndex>(out_index_).subspan(out_offsets_[n],
                                                         out_offsets_[n + 1] - out_offsets_[n]);
}

std::span<const EdgeIndex> DyTagStore::in_edges(NodeId n) const {
  if (n + std::size_t{1} >= in_offsets_.size()) return {};
  return std::span<const EdgeIndex>(in_index_).subspan(in_offsets_[n],
                                                        in_offsets_[n + 1] - in_offsets_[n]);
}

std::size_t DyTagStore::count_before(std::span<const EdgeIndex> incidence, Timestamp t) const {
  auto it = std::partition_point(incidence.begin(), incidence.end(),
                                 [&](EdgeIndex i) { return edges_[i].ts < t; });
  return static_cast<std::size_t>(it - incidence.begin());
}

std::size_t DyTagStore::edges_before(Timestamp t) const {
  auto it = std::partition_point(edges_.begin(), edges_.end(),
                                 [&](const TemporalEdge& e) { return e.ts < t; });
  return static_cast<std::size_t>(it - edges_.begin());
}

std::vector<NodeId> DyTagStore::destination_nodes() const {
  std::vector<NodeId> out;
  for (NodeId n = 0; n + std::size_t{1} < in_offsets_.size(); ++n)
    if (in_offsets_[n + 1] > in_offsets_[n]) out.push_back(n);
  return out;
}

std::optional<LabelId> DyTagStore::modal_label(std::size_t end) const {
  end = std::min(end, edges_.size());
  std::unordered_map<LabelId, std::pair<std::size_t, std::size_t>> counts;  // count, first index
  for (std::size_t i = 0; i < end; ++i) {
    auto [it, inserted] = counts.try_emplace(edges_[i].label, 0, i);
    ++it->second.first;
  }
  std::optional<LabelId> best;
  std::pair<std::size_t, std::size_t> best_key{0, 0};
  for (const auto& [label, key] : counts) {
    if (!best || key.first > best_key.first ||
        (key.first == best_key.first && key.second < best_key.second)) {
      best = label;
      best_key = key;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

std::string where(const CsvReader& r) { return r.path().string() + ":" + std::to_string(r.line()); }

template <class Int>
Int parse_id(const CsvReader& r, std::string_view field, const char* column) {
  Int value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end)
    throw IngestError(where(r) + ": column '" + column + "' is not a non-negative integer: '" +
                      std::string(field) + "'");
  return value;
}

Timestamp parse_ts(const CsvReader& r, std::string_view field) {
  double value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end || !(value >= 0) || !std::isfinite(value))
    throw IngestError(where(r) + ": column 'ts' is not a non-negative number: '" +
                      std::string(field) + "'");
  return value;
}

void expect_header(CsvReader& r, std::vector<std::string>& row,
                   std::initializer_list<std::string_view> names) {
  if (!r.next(row)) throw IngestError(r.path().string() + ": file is empty (missing header)");
  bool ok = row.size() == names.size();
  std::size_t i = 0;
  for (auto name : names) {
    if (!ok) break;
    ok = row[i++] == name;
  }
  if (!ok) {
    std::string expected;
    for (auto name : names) expected += (expected.empty() ? "" : ",") + std::string(name);
    throw IngestError(where(r) + ": expected header '" + expected + "'");
  }
}

TextTable read_text_table(const std::filesystem::path& path, std::string_view id_column) {
  CsvReader r(path);
  std::vector<std::string> row;
  expect_header(r, row, {id_column, "text"});
  TextTable table;
  while (r.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    if (row.size() != 2)
      throw IngestError(where(r) + ": expected 2 fields, found " + std::to_string(row.size()));
    const auto id = parse_id<std::uint32_t>(r, row[0], std::string(id_column).c_str());
    if (!table.insert(id, std::move(row[1])))
      throw IngestError(where(r) + ": duplicate id " + std::to_string(id));
  }
  return table;
}

std::string format_ts(Timestamp ts) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, ts);
  return std::string(buf, ptr);
}

}  // namespace

DyTagStore ingest_dataset(const DatasetFiles& files, bool bipartite) {
  TextTable node_texts = read_text_table(files.node_texts, "node_id");
  TextTable edge_texts = read_text_table(files.edge_texts, "text_id");
  TextTable labels = read_text_table(files.labels, "label_id");

  CsvReader r(files.edges);
  std::vector<std::string> row;
  expect_header(r, row, {"src", "dst", "ts", "label", "text_id"});
  std::vector<TemporalEdge> edges;
  bool sorted = true;
  while (r.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 5)
      throw IngestError(where(r) + ": expected 5 fields, found " + std::to_string(row.size()));
    TemporalEdge e;
    e.src = parse_id<NodeId>(r, row[0], "src");
    e.dst = parse_id<NodeId>(r, row[1], "dst");
    e.ts = parse_ts(r, row[2]);
    e.label = parse_id<LabelId>(r, row[3], "label");
    if (!row[4].empty()) e.text_id = parse_id<TextId>(r, row[4], "text_id");
    if (!node_texts.contains(e.src))
      throw IngestError(where(r) + ": unknown source node " + std::to_string(e.src));
    if (!node_texts.contains(e.dst))
      throw IngestError(where(r) + ": unknown destination node " + std::to_string(e.dst));
    if (!labels.contains(e.label))
      throw IngestError(where(r) + ": unknown label " + std::to_string(e.label));
    if (e.text_id && !edge_texts.contains(*e.text_id))
      throw IngestError(where(r) + ": unknown edge text " + std::to_string(*e.text_id));
    if (!edges.empty() && e.ts < edges.back().ts) sorted = false;
    edges.push_back(e);
  }
  if (edges.empty()) throw IngestError(files.edges.string() + ": edge file has no rows");
  if (!sorted) spdlog::info("{}: edges not in timestamp order, re-sorting stably", files.edges.string());

  auto store = DyTagStore::build(std::move(edges), std::move(node_texts), std::move(edge_texts),
                                 std::move(labels), bipartite);
  spdlog::info("ingested {} nodes, {} edges, {} labels", store.num_nodes(), store.num_edges(),
               store.num_labels());
  return store;
}

void export_dataset(const DyTagStore& store, const DatasetFiles& files) {
  auto open = [](const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    return out;
  };
  auto write_table = [&](const std::filesystem::path& p, const TextTable& t, const char* id_col) {
    auto out = open(p);
    out << id_col << ",text\n";
    for (auto id : t.ids()) out << id << ',' << csv_field(t.at(id)) << '\n';
  };
  write_table(files.node_texts, store.node_texts(), "node_id");
  write_table(files.edge_texts, store.edge_texts(), "text_id");
  write_table(files.labels, store.labels(), "label_id");
  auto out = open(files.edges);
  out << "src,dst,ts,label,text_id\n";
  for (const auto& e : store.edges()) {
    out << e.src << ',' << e.dst << ',' << format_ts(e.ts) << ',' << e.label << ',';
    if (e.text_id) out << *e.text_id;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// DTGB adapter

namespace {

std::size_t column_index(const CsvReader& r, const std::vector<std::string>& header,
                         const std::string& name, bool required) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  if (required) throw IngestError(where(r) + ": missing column '" + name + "'");
  return header.size();
}

}  // namespace

DatasetFiles import_dtgb(const std::filesystem::path& dir, const std::filesystem::path& out_dir,
                         const DtgbLayout& layout) {
  std::filesystem::create_directories(out_dir);
  DatasetFiles out{out_dir / "edges.csv", out_dir / "node_texts.csv", out_dir / "edge_texts.csv",
                   out_dir / "labels.csv"};

  auto convert_texts = [&](const std::filesystem::path& in_path, const std::filesystem::path& out_path,
                           const char* id_name) {
    std::ofstream out(out_path, std::ios::binary);
    out << id_name << ",text\n";
    if (!std::filesystem::exists(in_path)) return;
    CsvReader r(in_path);
    std::vector<std::string> row;
    if (!r.next(row)) return;
    const auto header = row;
    const auto id_col = column_index(r, header, layout.id_column, true);
    const auto text_col = column_index(r, header, layout.text_column, true);
    while (r.next(row)) {
      if (row.size() != header.size()) throw IngestError(where(r) + ": wrong field count");
      out << row[id_col] << ',' << csv_field(row[text_col]) << '\n';
    }
  };
  convert_texts(dir / "entity_text.csv", out.node_texts, "node_id");
  convert_texts(dir / "relation_text.csv", out.edge_texts, "text_id");

  CsvReader r(dir / "edge_list.csv");
  std::vector<std::string> row;
  if (!r.next(row)) throw IngestError(where(r) + ": empty edge list");
  const auto header = row;
  const auto src = column_index(r, header, layout.src_column, true);
  const auto dst = column_index(r, header, layout.dst_column, true);
  const auto ts = column_index(r, header, layout.ts_column, true);
  const auto label = column_index(r, header, layout.label_column, true);
  const auto text = column_index(r, header, layout.text_id_column, false);
  std::ofstream edges(out.edges, std::ios::binary);
  edges << "src,dst,ts,label,text_id\n";
  std::vector<std::string> seen_labels;
  while (r.next(row)) {
    if (row.size() != header.size()) throw IngestError(where(r) + ": wrong field count");
    edges << row[src] << ',' << row[dst] << ',' << row[ts] << ',' << row[label] << ','
          << (text < row.size() ? row[text] : std::string{}) << '\n';
    if (std::find(seen_labels.begin(), seen_labels.end(), row[label]) == seen_labels.end())
      seen_labels.push_back(row[label]);
  }

  // Label names come from label_text.csv when present, else the numeric id.
  std::ofstream labels(out.labels, std::ios::binary);
  labels << "label_id,text\n";
  if (std::filesystem::exists(dir / "label_text.csv")) {
    CsvReader lr(dir / "label_text.csv");
    std::vector<std::string> lrow;
    lr.next(lrow);
    const auto lheader = lrow;
    const auto id_col = column_index(lr, lheader, layout.id_column, true);
    const auto text_col = column_index(lr, lheader, layout.text_column, true);
    while (lr.next(lrow)) labels << lrow[id_col] << ',' << csv_field(lrow[text_col]) << '\n';
  } else {
    std::sort(seen_labels.begin(), seen_labels.end(), [](const auto& a, const auto& b) {
      return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    for (const auto& l : seen_labels) labels << l << ',' << l << '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits and neighbor sets

SplitView chronological_split(const DyTagStore& store, double train_frac, double valid_frac) {
  if (!(train_frac > 0) || !(valid_frac > 0) || !(train_frac + valid_frac < 1))
    throw UsageError("split fractions must satisfy 0 < train, 0 < valid, train + valid < 1");
  const std::size_t n = store.num_edges();
  if (n < 3) throw UsageError("at least 3 edges are needed for a three-way split");
  SplitView s;
  s.store = &store;
  // The epsilon keeps exact products such as 0.85 * 100 from flooring to 84.
  s.train_end = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n) + 1e-9));
  s.valid_end = static_cast<std::size_t>(std::floor((train_frac + valid_frac) * static_cast<double>(n) + 1e-9));
  s.valid_end = std::min(s.valid_end, n);
  s.train_end = std::min(s.train_end, s.valid_end);
  return s;
}

std::vector<EvalBatch> select_eval_window(const SplitView& split, std::size_t sample_count,
                                          std::size_t batch_size) {
  if (batch_size == 0) throw UsageError("batch size must be positive");
  const std::size_t available = split.test_size();
  if (sample_count > available) {
    spdlog::info("eval window clamped from {} to {} test edges", sample_count, available);
    sample_count = available;
  }
  std::vector<EvalBatch> batches;
  for (std::size_t off = 0; off < sample_count; off += batch_size) {
    EvalBatch b;
    b.index = batches.size();
    b.begin = split.valid_end + off;
    b.end = split.valid_end + std::min(off + batch_size, sample_count);
    batches.push_back(b);
  }
  return batches;
}

std::vector<NodeId> neighbors_before(const DyTagStore& store, NodeId node, Timestamp t,
                                     Direction direction) {
  if (!store.has_node(node)) {
    spdlog::warn("neighbors_before: unregistered node {}", node);
    return {};
  }
  std::vector<NodeId> out;
  auto outs = store.out_edges(node);
  outs = outs.first(store.count_before(outs, t));
  for (EdgeIndex i : outs) out.push_back(store.edge(i).dst);
  if (direction == Direction::undirected) {
    auto ins = store.in_edges(node);
    ins = ins.first(store.count_before(ins, t));
    for (EdgeIndex i : ins) out.push_back(store.edge(i).src);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Binary cache

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'T', 'A', 'G', 'S', 'T', 'R'};

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& p) : out_(p, std::ios::binary) {
    if (!out_) throw Error("cannot write " + p.string());
  }
  template <class T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void table(const TextTable& t) {
    const auto ids = t.ids();
    pod<std::uint64_t>(ids.size());
    for (auto id : ids) {
      pod(id);
      str(t.at(id));
    }
  }
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void finish() {
    out_.flush();
    if (!out_) throw Error("write failed");
  }

 private:
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& p) : in_(p, std::ios::binary), path_(p) {
    if (!in_) throw Error("cannot read " + p.string());
  }
  template <class T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  TextTable table() {
    TextTable t;
    const auto n = pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto id = pod<std::uint32_t>();
      t.insert(id, str());
    }
    return t;
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    check();
  }

 private:
  void check() {
    if (!in_) throw Error(path_.string() + ": truncated store cache");
  }
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

void save_store(const DyTagStore& store, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  BinaryWriter w(path);
  w.raw(kMagic, sizeof kMagic);
  w.pod(kStoreFormatVersion);
  w.pod<std::uint8_t>(store.bipartite() ? 1 : 0);
  w.table(store.node_texts());
  w.table(store.edge_texts());
  w.table(store.labels());
  w.pod<std::uint64_t>(store.num_edges());
  for (const auto& e : store.edges()) {
    w.pod(e.src);
    w.pod(e.dst);
    w.pod(e.ts);
    w.pod(e.label);
    w.pod<std::int64_t>(e.text_id ? static_cast<std::int64_t>(*e.text_id) : -1);
  }
  w.finish();
}

DyTagStore load_store(const std::filesystem::path& path) {
  BinaryReader r(path);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw Error(path.string() + ": not a store cache");
  const auto version = r.pod<std::uint32_t>();
  if (version != kStoreFormatVersion)
    throw Error(path.string() + ": store format version " + std::to_string(version) +
                ", expected " + std::to_string(kStoreFormatVersion));
  const bool bipartite = r.pod<std::uint8_t>() != 0;
  auto nodes = r.table();
  auto texts = r.table();
  auto labels = r.table();
  const auto n = r.pod<std::uint64_t>();
  std::vector<TemporalEdge> edges(n);
  for (auto& e : edges) {
    e.src = r.pod<NodeId>();
    e.dst = r.pod<NodeId>();
    e.ts = r.pod<Timestamp>();
    e.label = r.pod<LabelId>();
    const auto t = r.pod<std::int64_t>();
    if (t >= 0) e.text_id = static_cast<TextId>(t);
  }
  return DyTagStore::build(std::move(edges), std::move(nodes), std::move(texts), std::move(labels),
                           bipartite);
}

}  // namespace dytag
