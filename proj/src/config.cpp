#include "dytag/config.hpp"

#include <spdlog/fmt/fmt.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dytag/error.hpp"
#include "dytag/hashing.hpp"

namespace dytag {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const ordered_json& config_defaults() {
  static const ordered_json d = {
      {"edges", nullptr},
      {"node_texts", nullptr},
      {"edge_texts", nullptr},
      {"labels", nullptr},
      {"store", nullptr},
      {"dataset_name", ""},
      {"description", ""},
      {"bipartite", false},
      {"train_frac", 0.7},
      {"valid_frac", 0.15},
      {"backend", "mock"},
      {"endpoint", ""},
      {"model", "gpt-4o-mini"},
      {"temperature", 0.0},
      {"max_tokens", 1024},
      {"max_in_flight", 8},
      {"mock_rules", nullptr},
      {"replay_transcript", nullptr},
      {"seed", 0},
      {"sample_count", 10240},
      {"batch_size", 256},
      {"mode", "gad"},
      {"tasks", {"lp", "nr", "ec"}},
      {"run_dir", "run"},
      {"knowledge_cache", nullptr},
      {"transcript", nullptr},
      {"use_edge_text", false},
      {"force_regenerate", false},
      {"local_fraction", 0.1},
      {"trajectories", 50},
      {"text_sample_count", 30},
      {"text_truncation", 50},
      {"direction", "undirected"},
      {"workers", 8},
      {"nr_negatives", 100},
      {"reflection", true},
  };
  return d;
}

namespace {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const std::vector<std::string> kExecutionOnly = {"workers", "max_in_flight", "force_regenerate"};

/// Collects typed values and the errors found while reading them.
class Reader {
 public:
  Reader(const json& doc, fs::path base) : doc_(doc), base_(std::move(base)) {}

  std::vector<std::string> errors;

  const json* raw(const std::string& key) const {
    auto it = doc_.find(key);
    return it == doc_.end() || it->is_null() ? nullptr : &*it;
  }

  bool boolean(const std::string& key, bool& out) {
    const auto* v = raw(key);
    if (!v) return false;
    if (!v->is_boolean()) return fail(key, "must be true or false");
    out = v->get<bool>();
    return true;
  }

  bool string(const std::string& key, std::string& out) {
    const auto* v = raw(key);
    if (!v) return false;
    if (!v->is_string()) return fail(key, "must be a string");
    out = v->get<std::string>();
    return true;
  }

  bool path(const std::string& key, std::optional<fs::path>& out) {
    std::string s;
    if (!string(key, s)) return false;
    if (s.empty()) return fail(key, "must not be empty");
    out = resolve(s);
    return true;
  }

  bool number(const std::string& key, double& out, double lo, double hi, bool lo_open = false) {
    const auto* v = raw(key);
    if (!v) return false;
    if (!v->is_number()) return fail(key, "must be a number");
    const double x = v->get<double>();
    if (x > hi || x < lo || (lo_open && x == lo))
      return fail(key, fmt::format("must be in {}{}, {}]", lo_open ? "(" : "[", lo, hi));
    out = x;
    return true;
  }

  template <class T>
  bool integer(const std::string& key, T& out, std::int64_t min_value) {
    const auto* v = raw(key);
    if (!v) return false;
    if (!v->is_number_integer()) return fail(key, "must be an integer");
    if (v->is_number_unsigned()) {
      const auto x = v->get<std::uint64_t>();
      if (min_value > 0 && x < static_cast<std::uint64_t>(min_value))
        return fail(key, fmt::format("must be at least {}", min_value));
      out = static_cast<T>(x);
      return true;
    }
    const auto x = v->get<std::int64_t>();
    if (x < min_value) return fail(key, fmt::format("must be at least {}", min_value));
    out = static_cast<T>(x);
    return true;
  }

  fs::path resolve(const std::string& s) const {
    fs::path p(s);
    return p.is_absolute() ? p : (base_ / p).lexically_normal();
  }

  bool fail(const std::string& key, const std::string& msg) {
    errors.push_back(fmt::format("{}: {}", key, msg));
    return false;
  }

 private:
  const json& doc_;
  fs::path base_;
};

}  // namespace

std::optional<std::string> suggest_key(std::string_view unknown) {
  std::optional<std::string> best;
  std::size_t best_d = 4;
  for (const auto& [key, _] : config_defaults().items()) {
    const auto d = edit_distance(unknown, key);
    if (d < best_d) {
      best_d = d;
      best = key;
    }
  }
  return best;
}

ConfigResult parse_config(const json& j, const fs::path& base_dir, std::optional<std::string> api_key) {
  ConfigResult res;
  if (!j.is_object()) {
    res.errors.push_back("config must be a JSON object");
    return res;
  }
  const auto& defaults = config_defaults();
  for (const auto& [key, _] : j.items()) {
    if (defaults.contains(key)) continue;
    auto hint = suggest_key(key);
    res.errors.push_back(hint ? fmt::format("unknown key '{}' (did you mean '{}'?)", key, *hint)
                              : fmt::format("unknown key '{}'", key));
  }

  Reader r(j, base_dir);
  RunConfig c;
  r.path("edges", c.edges);
  r.path("node_texts", c.node_texts);
  r.path("edge_texts", c.edge_texts);
  r.path("labels", c.labels);
  r.path("store", c.store);
  r.string("dataset_name", c.dataset_name);
  r.string("description", c.description);
  r.boolean("bipartite", c.bipartite);
  r.number("train_frac", c.train_frac, 0, 1, true);
  r.number("valid_frac", c.valid_frac, 0, 1, true);
  if (c.train_frac + c.valid_frac >= 1) r.fail("valid_frac", "train_frac + valid_frac must be below 1");

  const bool have_files = c.edges || c.node_texts || c.edge_texts || c.labels;
  if (have_files) {
    for (const char* key : {"edges", "node_texts", "edge_texts", "labels"})
      if (!r.raw(key)) r.fail(key, "required when any dataset file is given");
  } else if (!c.store) {
    r.fail("edges", "dataset files (edges, node_texts, edge_texts, labels) or a store cache are required");
  }
  if (c.dataset_name.empty()) {
    if (c.edges)
      c.dataset_name = c.edges->parent_path().filename().string();
    else if (c.store)
      c.dataset_name = c.store->stem().string();
  }

  std::string backend;
  if (r.string("backend", backend)) {
    if (auto b = parse_backend(backend))
      c.backend = *b;
    else
      r.fail("backend", "must be one of mock, http, replay");
  }
  r.string("endpoint", c.endpoint);
  r.string("model", c.model);
  if (c.model.empty()) r.fail("model", "must not be empty");
  r.number("temperature", c.temperature, 0, 2);
  r.integer("max_tokens", c.max_tokens, 1);
  r.integer("max_in_flight", c.max_in_flight, 1);
  r.path("mock_rules", c.mock_rules);
  r.path("replay_transcript", c.replay_transcript);
  if (c.backend == BackendKind::http) {
    if (c.endpoint.empty()) r.fail("endpoint", "required for the http backend");
    if (!api_key || api_key->empty())
      r.fail("backend", "the http backend needs the LLM_API_KEY environment variable");
    else
      c.api_key = *api_key;
  }
  if (c.backend == BackendKind::replay && !c.replay_transcript)
    r.fail("replay_transcript", "required for the replay backend");

  r.integer("seed", c.seed, 0);
  r.integer("sample_count", c.sample_count, 1);
  r.integer("batch_size", c.batch_size, 1);
  std::string mode;
  if (r.string("mode", mode)) {
    if (auto m = parse_mode(mode))
      c.mode = *m;
    else
      r.fail("mode", "must be one of text, text-fewshot, structure, structure-fewshot, gad");
  }
  if (const auto* t = r.raw("tasks")) {
    if (!t->is_array() || t->empty()) {
      r.fail("tasks", "must be a nonempty list of lp, nr, ec");
    } else {
      c.tasks.clear();
      for (const auto& item : *t) {
        const auto task = item.is_string() ? parse_task(item.get<std::string>()) : std::nullopt;
        if (!task) {
          r.fail("tasks", fmt::format("unknown task {}", item.dump()));
        } else if (std::find(c.tasks.begin(), c.tasks.end(), *task) == c.tasks.end()) {
          c.tasks.push_back(*task);
        }
      }
    }
  }
  std::string run_dir;
  if (r.string("run_dir", run_dir)) {
    if (run_dir.empty()) r.fail("run_dir", "must not be empty");
  } else {
    run_dir = "run";
  }
  c.run_dir = r.resolve(run_dir);
  std::optional<fs::path> p;
  c.knowledge_cache = r.path("knowledge_cache", p) ? *p : c.run_dir / "knowledge.json";
  p.reset();
  c.transcript = r.path("transcript", p) ? *p : c.run_dir / "transcript.jsonl";
  if (c.replay_transcript && fs::absolute(*c.replay_transcript) == fs::absolute(c.transcript))
    r.fail("transcript", "must differ from replay_transcript, which it would overwrite");
  r.boolean("use_edge_text", c.use_edge_text);
  r.boolean("force_regenerate", c.force_regenerate);
  r.number("local_fraction", c.local_fraction, 0, 1, true);
  r.integer("trajectories", c.trajectories, 1);
  r.integer("text_sample_count", c.text_sample_count, 1);
  r.integer("text_truncation", c.text_truncation, 1);
  std::string direction;
  if (r.string("direction", direction)) {
    if (direction == "undirected")
      c.direction = Direction::undirected;
    else if (direction == "directed")
      c.direction = Direction::directed;
    else
      r.fail("direction", "must be undirected or directed");
  }
  r.integer("workers", c.workers, 1);
  r.integer("nr_negatives", c.nr_negatives, 1);
  r.boolean("reflection", c.reflection);

  res.errors.insert(res.errors.end(), r.errors.begin(), r.errors.end());
  if (!res.errors.empty()) return res;

  // Canonical form: defaults overlaid with the document, in key order.
  c.canonical = ordered_json::object();
  for (const auto& [key, value] : defaults.items()) {
    if (std::find(kExecutionOnly.begin(), kExecutionOnly.end(), key) != kExecutionOnly.end()) continue;
    auto it = j.find(key);
    c.canonical[key] = it != j.end() ? ordered_json(*it) : value;
  }
  res.config = std::move(c);
  return res;
}

std::string RunConfig::digest() const { return sha256_hex(canonical.dump()); }

DatasetFiles RunConfig::dataset_files() const {
  if (!edges || !node_texts || !edge_texts || !labels) throw UsageError("config names no dataset files");
  return {*edges, *node_texts, *edge_texts, *labels};
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  std::optional<std::string> key;
  if (const char* env = std::getenv("LLM_API_KEY")) key = env;
  auto res = parse_config(j, fs::absolute(path).parent_path(), key);
  if (!res.config) {
    std::string msg = path.string() + ": invalid configuration";
    for (const auto& e : res.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return std::move(*res.config);
}

}  // namespace dytag
