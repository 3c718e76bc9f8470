#include "dytag/pipeline.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "dytag/agents.hpp"
#include "dytag/error.hpp"
#include "dytag/hashing.hpp"
#include "dytag/http_backend.hpp"
#include "dytag/reflection.hpp"
#include "dytag/scripted_backend.hpp"

namespace dytag {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string task_list(const std::vector<Task>& tasks) {
  std::vector<std::string> names;
  for (Task t : tasks) {
    switch (t) {
      case Task::lp: names.push_back("future link prediction"); break;
      case Task::nr: names.push_back("destination node retrieval"); break;
      case Task::ec: names.push_back("edge classification"); break;
    }
  }
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
  return out;
}

bool wants_link(const RunConfig& cfg) {
  return std::any_of(cfg.tasks.begin(), cfg.tasks.end(), [](Task t) { return t != Task::ec; });
}

bool wants_edge_label(const RunConfig& cfg) {
  return std::find(cfg.tasks.begin(), cfg.tasks.end(), Task::ec) != cfg.tasks.end();
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

const StageRecord* Manifest::stage(std::string_view name) const {
  for (const auto& s : stages)
    if (s.name == name) return &s;
  return nullptr;
}

ordered_json Manifest::to_json() const {
  auto list = ordered_json::array();
  for (const auto& s : stages)
    list.push_back({{"name", s.name}, {"inputs", s.inputs}, {"outputs", s.outputs}});
  return {{"schema_version", kManifestSchemaVersion},
          {"config_digest", config_digest},
          {"complete", complete},
          {"stages", list},
          {"started_at", started_at},
          {"finished_at", finished_at}};
}

Manifest Manifest::from_json(const json& j) {
  if (j.value("schema_version", 0) != kManifestSchemaVersion) throw UsageError("unsupported manifest schema version");
  Manifest m;
  m.config_digest = j.at("config_digest").get<std::string>();
  m.complete = j.at("complete").get<bool>();
  for (const auto& s : j.at("stages"))
    m.stages.push_back({s.at("name").get<std::string>(), s.at("inputs").get<std::map<std::string, std::string>>(),
                        s.at("outputs").get<std::map<std::string, std::string>>()});
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  return m;
}

std::string Manifest::stable_dump() const {
  auto j = to_json();
  j.erase("started_at");
  j.erase("finished_at");
  return j.dump(2);
}

std::string transcript_hash(const fs::path& path) {
  if (!fs::exists(path)) return sha256_hex("");
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("corrupt transcript line in " + path.string());
    j.erase("wall_time");
    if (j.contains("response")) {
      j["response"].erase("latency_ms");
      j["response"].erase("backend");
    }
    lines.push_back(j.dump());
  }
  std::sort(lines.begin(), lines.end());
  std::string all;
  for (const auto& l : lines) all += l + "\n";
  return sha256_hex(all);
}

// ---------------------------------------------------------------------------
// Backends

std::shared_ptr<ChatBackend> make_backend(const RunConfig& cfg, const std::string& global_modal_label) {
  switch (cfg.backend) {
    case BackendKind::http: {
      HttpOptions o;
      o.endpoint = cfg.endpoint;
      o.api_key = cfg.api_key;
      return std::make_shared<HttpBackend>(o);
    }
    case BackendKind::replay:
      return std::make_shared<ReplayBackend>(*cfg.replay_transcript);
    case BackendKind::mock: {
      HeuristicConfig h{global_modal_label};
      std::vector<MockRule> rules;
      if (cfg.mock_rules) rules = ScriptedBackend::load_rules(*cfg.mock_rules);
      return std::make_shared<ScriptedBackend>(std::move(rules), h);
    }
  }
  throw UsageError("unknown backend");
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(RunConfig cfg, bool carry_stages) : cfg_(std::move(cfg)) {
  manifest_.config_digest = cfg_.digest();
  manifest_.started_at = now_utc();
  const auto prev = cfg_.run_dir / "manifest.json";
  if (fs::exists(prev)) {
    try {
      previous_ = Manifest::from_json(json::parse(read_text(prev)));
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable manifest {}: {}", prev.string(), e.what());
    }
  }
  if (carry_stages && previous_) manifest_.stages = previous_->stages;
}

Pipeline::~Pipeline() = default;

fs::path Pipeline::path_of(const std::string& artifact) const { return cfg_.run_dir / artifact; }

void Pipeline::record(StageRecord stage) {
  auto it = std::find_if(manifest_.stages.begin(), manifest_.stages.end(),
                         [&](const StageRecord& s) { return s.name == stage.name; });
  if (it != manifest_.stages.end())
    *it = std::move(stage);
  else
    manifest_.stages.push_back(std::move(stage));
}

void Pipeline::write_manifest() {
  manifest_.finished_at = now_utc();
  write_text(path_of("manifest.json"), manifest_.to_json().dump(2) + "\n");
}

namespace {

/// Manifest key of an artifact: relative to the run directory when possible.
std::string artifact_key(const fs::path& run_dir, const fs::path& p) {
  const auto rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(run_dir).lexically_normal());
  return rel.empty() ? p.string() : rel.generic_string();
}

}  // namespace

const DyTagStore& Pipeline::store() {
  if (store_) return *store_;
  StageRecord stage{"store", {}, {}};
  if (cfg_.edges) {
    const auto files = cfg_.dataset_files();
    stage.inputs = {{"edges", sha256_file(files.edges)},
                    {"node_texts", sha256_file(files.node_texts)},
                    {"edge_texts", sha256_file(files.edge_texts)},
                    {"labels", sha256_file(files.labels)},
                    {"bipartite", cfg_.bipartite ? "true" : "false"}};
    spdlog::info("ingesting {}", files.edges.string());
    store_ = std::make_unique<DyTagStore>(ingest_dataset(files, cfg_.bipartite));
    const auto bin = path_of("store.bin");
    save_store(*store_, bin);
    store_hash_ = sha256_file(bin);
    stage.outputs = {{"store.bin", *store_hash_}};
  } else {
    store_hash_ = sha256_file(*cfg_.store);
    stage.inputs = {{"store", *store_hash_}};
    store_ = std::make_unique<DyTagStore>(load_store(*cfg_.store));
  }
  spdlog::info("store: {} nodes, {} edges, {} labels", store_->num_nodes(), store_->num_edges(), store_->num_labels());
  record(std::move(stage));
  return *store_;
}

std::string Pipeline::store_hash() {
  store();
  return *store_hash_;
}

SplitView Pipeline::split() { return chronological_split(store(), cfg_.train_frac, cfg_.valid_frac); }

const PrepStatistics& Pipeline::prep() {
  if (prep_) return *prep_;
  prep_ = prepare_statistics(split(), cfg_.seed, cfg_.direction, cfg_.text_sample_count, cfg_.text_truncation);
  const auto out = path_of("prep.json");
  write_text(out, prep_->to_json().dump(2) + "\n");
  record({"prep",
          {{"store", store_hash()},
           {"settings", sha256_hex(ordered_json{{"seed", cfg_.seed},
                                                {"direction", cfg_.direction == Direction::directed},
                                                {"train_frac", cfg_.train_frac},
                                                {"valid_frac", cfg_.valid_frac},
                                                {"text_sample_count", cfg_.text_sample_count},
                                                {"text_truncation", cfg_.text_truncation}}
                                      .dump())}},
          {{"prep.json", sha256_file(out)}}});
  return *prep_;
}

ChatGateway& Pipeline::gateway() {
  if (gateway_) return *gateway_;
  const auto sp = split();
  const auto modal = store().modal_label(sp.valid_end);
  const std::string modal_text = modal ? std::string(store().label_text(*modal)) : std::string();
  auto backend = make_backend(cfg_, modal_text);
  // One transcript per run; earlier exchanges are discarded.
  std::error_code ec;
  fs::remove(cfg_.transcript, ec);
  GatewayOptions opts;
  opts.model = cfg_.model;
  opts.temperature = cfg_.temperature;
  opts.max_tokens = cfg_.max_tokens;
  opts.max_in_flight = cfg_.max_in_flight;
  opts.transcript = cfg_.transcript;
  gateway_ = std::make_unique<ChatGateway>(std::move(backend), opts);
  return *gateway_;
}

std::string Pipeline::knowledge_input_hash() {
  ordered_json settings = {{"store", store_hash()},
                           {"backend", backend_name(cfg_.backend)},
                           {"model", cfg_.model},
                           {"temperature", cfg_.temperature},
                           {"max_tokens", cfg_.max_tokens},
                           {"seed", cfg_.seed},
                           {"description", cfg_.description},
                           {"tasks", cfg_.canonical.value("tasks", ordered_json::array())},
                           {"train_frac", cfg_.train_frac},
                           {"valid_frac", cfg_.valid_frac},
                           {"local_fraction", cfg_.local_fraction},
                           {"trajectories", cfg_.trajectories},
                           {"text_sample_count", cfg_.text_sample_count},
                           {"text_truncation", cfg_.text_truncation},
                           {"direction", cfg_.direction == Direction::directed ? "directed" : "undirected"},
                           {"use_edge_text", cfg_.use_edge_text},
                           {"reflection", cfg_.reflection}};
  if (cfg_.mock_rules && cfg_.backend == BackendKind::mock) settings["mock_rules"] = sha256_file(*cfg_.mock_rules);
  if (cfg_.replay_transcript && cfg_.backend == BackendKind::replay)
    settings["replay_transcript"] = sha256_file(*cfg_.replay_transcript);
  return sha256_hex(settings.dump());
}

namespace {

constexpr std::string_view kAllSteps = "global+local+reflection";

}  // namespace

const KnowledgeStore& Pipeline::knowledge() {
  if (knowledge_) return *knowledge_;
  const auto key = artifact_key(cfg_.run_dir, cfg_.knowledge_cache);
  const std::map<std::string, std::string> inputs = {{"inputs", knowledge_input_hash()},
                                                     {"steps", std::string(kAllSteps)}};
  if (!cfg_.force_regenerate && previous_ && fs::exists(cfg_.knowledge_cache)) {
    const auto* prev = previous_->stage("knowledge");
    if (prev && prev->inputs == inputs) {
      const auto out = prev->outputs.find(key);
      if (out != prev->outputs.end() && out->second == sha256_file(cfg_.knowledge_cache)) {
        spdlog::info("knowledge cache hit: reusing {}", cfg_.knowledge_cache.string());
        knowledge_ = KnowledgeStore::load(cfg_.knowledge_cache);
        record({"knowledge", inputs, {{key, out->second}}});
        return *knowledge_;
      }
    }
  }
  knowledge_.reset();
  summarize_global();
  summarize_local();
  reflect();
  return *knowledge_;
}

void Pipeline::save_knowledge(const std::string& steps) {
  knowledge_->save(cfg_.knowledge_cache);
  const auto key = artifact_key(cfg_.run_dir, cfg_.knowledge_cache);
  record({"knowledge", {{"inputs", knowledge_input_hash()}, {"steps", steps}}, {{key, sha256_file(cfg_.knowledge_cache)}}});
}

KnowledgeStore& Pipeline::require_knowledge() {
  if (!knowledge_) {
    if (!fs::exists(cfg_.knowledge_cache))
      throw UsageError("no knowledge at " + cfg_.knowledge_cache.string() + "; run summarize-global first");
    knowledge_ = KnowledgeStore::load(cfg_.knowledge_cache);
  }
  if (!knowledge_->dataset_card) throw UsageError("knowledge has no dataset card; run summarize-global first");
  return *knowledge_;
}

const KnowledgeStore& Pipeline::load_knowledge(const fs::path& path) {
  knowledge_ = KnowledgeStore::load(path);
  return *knowledge_;
}

const KnowledgeStore& Pipeline::summarize_global() {
  auto& gw = gateway();
  KnowledgeStore k;
  const std::string description =
      cfg_.description.empty() ? fmt::format("A dynamic text-attributed graph named {}.", cfg_.dataset_name)
                               : cfg_.description;
  spdlog::info("knowledge: initial agent");
  auto card = run_initial_agent(description, task_list(cfg_.tasks), gw);
  k.dataset_card = card.value;
  k.provenance["dataset_card"] = card.digests;
  const auto& stats = prep();
  if (wants_link(cfg_)) {
    spdlog::info("knowledge: global link summary");
    auto link = run_global_link_summary(stats, card.value, gw);
    k.global_link = link.knowledge;
    if (!link.thresholds.empty()) k.thresholds["NR"] = link.thresholds;
    k.provenance["global_link"] = link.digests;
  }
  if (wants_edge_label(cfg_)) {
    spdlog::info("knowledge: global edge label summary");
    auto el = run_global_edge_label_summary(stats, card.value, gw);
    k.global_edge_label = el.value;
    k.provenance["global_edge_label"] = el.digests;
  }
  knowledge_ = std::move(k);
  save_knowledge("global");
  return *knowledge_;
}

const KnowledgeStore& Pipeline::summarize_local() {
  auto& k = require_knowledge();
  auto& gw = gateway();
  const auto sp = split();
  const auto nodes = select_active_nodes(sp, cfg_.local_fraction);
  spdlog::info("knowledge: local summaries for {} nodes", nodes.size());
  k.local_profiles.clear();
  for (auto it = k.provenance.begin(); it != k.provenance.end();)
    it = it->first.rfind("local.", 0) == 0 ? k.provenance.erase(it) : std::next(it);
  for (auto& [node, profile] : run_local_summaries(sp, nodes, *k.dataset_card, gw, cfg_.workers)) {
    k.local_profiles[node] = profile.value;
    k.provenance["local." + std::to_string(node)] = profile.digests;
  }
  save_knowledge("global+local");
  return k;
}

const KnowledgeStore& Pipeline::reflect() {
  auto& k = require_knowledge();
  if (!cfg_.reflection || !k.global_link) {
    save_knowledge(std::string(kAllSteps));
    return k;
  }
  auto& gw = gateway();
  spdlog::info("knowledge: reflection");
  k.reflection.erase("LP");
  const auto probes = collect_trajectories(split(), k, gw, cfg_.trajectories, cfg_.seed, cfg_.direction, cfg_.workers);
  auto outcome = run_reflection(probes, *k.global_link, gw);
  k.reflection["LP"] = outcome.value;
  auto digests = probes.digests;
  digests.insert(digests.end(), outcome.digests.begin(), outcome.digests.end());
  k.provenance["reflection.LP"] = std::move(digests);
  save_knowledge(std::string(kAllSteps));
  return k;
}

const std::vector<PredictionRecord>& Pipeline::load_predictions(Task task) {
  const auto path = path_of(fmt::format("predictions_{}.jsonl", task_name(task)));
  if (!fs::exists(path)) throw UsageError("no predictions at " + path.string() + "; run predict first");
  return predictions_[task] = read_predictions(path);
}

const std::vector<PredictionRecord>& Pipeline::predictions(Task task) {
  if (auto it = predictions_.find(task); it != predictions_.end()) return it->second;
  const KnowledgeStore* k = cfg_.mode == PromptMode::gad ? &knowledge() : nullptr;
  std::map<std::string, std::string> inputs = {{"store", store_hash()}, {"config", cfg_.digest()}};
  if (k) inputs["knowledge"] = sha256_hex(k->serialize());
  const auto input_hash = sha256_hex(json(inputs).dump());

  TaskOptions opts;
  opts.task = task;
  opts.mode = cfg_.mode;
  opts.sample_count = cfg_.sample_count;
  opts.batch_size = cfg_.batch_size;
  opts.seed = cfg_.seed;
  opts.use_edge_text = cfg_.use_edge_text;
  opts.direction = cfg_.direction;
  opts.workers = cfg_.workers;
  opts.nr_negatives = cfg_.nr_negatives;
  opts.checkpoint = path_of(fmt::format("checkpoints/{}-{}.jsonl", task_name(task), input_hash.substr(0, 12)));

  spdlog::info("predict: {} in {} mode", task_name(task), mode_name(cfg_.mode));
  auto records = run_task(split(), opts, gateway(), k);
  const auto name = fmt::format("predictions_{}.jsonl", task_name(task));
  write_predictions(path_of(name), records);
  std::error_code ec;
  fs::remove(*opts.checkpoint, ec);
  record({fmt::format("predict_{}", task_name(task)), inputs, {{name, sha256_file(path_of(name))}}});
  return predictions_[task] = std::move(records);
}

EvalReport Pipeline::report(Task task) {
  const auto& records = predictions(task);
  EvalReport rep;
  switch (task) {
    case Task::lp: rep = score_lp(records); break;
    case Task::nr: rep = score_nr(records); break;
    case Task::ec: rep = score_ec(records); break;
  }
  rep.dataset = cfg_.dataset_name;
  rep.config_digest = cfg_.digest();
  const auto base = fmt::format("report_{}", task_name(task));
  write_text(path_of(base + ".json"), rep.to_json().dump(2) + "\n");
  write_text(path_of(base + ".txt"), rep.render_text());
  const auto pred = fmt::format("predictions_{}.jsonl", task_name(task));
  record({"evaluate_" + std::string(task_name(task)),
          {{pred, sha256_file(path_of(pred))}},
          {{base + ".json", sha256_file(path_of(base + ".json"))}, {base + ".txt", sha256_file(path_of(base + ".txt"))}}});
  return rep;
}

void Pipeline::run() {
  try {
    fs::create_directories(cfg_.run_dir);
    store();
    prep();
    if (cfg_.mode == PromptMode::gad) knowledge();
    for (Task t : cfg_.tasks) {
      const auto rep = report(t);
      spdlog::info("{}", rep.render_text());
    }
    if (gateway_)
      record({"transcript", {}, {{artifact_key(cfg_.run_dir, cfg_.transcript), transcript_hash(cfg_.transcript)}}});
    manifest_.complete = true;
    write_manifest();
  } catch (...) {
    manifest_.complete = false;
    try {
      write_manifest();
    } catch (const std::exception& e) {
      spdlog::error("could not write manifest: {}", e.what());
    }
    throw;
  }
}

}  // namespace dytag
