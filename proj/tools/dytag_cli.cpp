#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>
#include <string>

#include "dytag/config.hpp"
#include "dytag/error.hpp"
#include "dytag/eval.hpp"
#include "dytag/graph_store.hpp"
#include "dytag/metrics.hpp"
#include "dytag/pipeline.hpp"
#include "dytag/recall.hpp"
#include "dytag/stats_prep.hpp"
#include "dytag/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dytag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;

std::vector<Task> tasks_or(const RunConfig& cfg, const std::string& task) {
  if (task.empty()) return cfg.tasks;
  auto t = parse_task(task);
  if (!t) throw ConfigError("unknown task '" + task + "' (expected lp, nr or ec)");
  return {*t};
}

RunConfig with_overrides(RunConfig cfg, bool force) {
  if (force) cfg.force_regenerate = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("dytag"));
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

  CLI::App app{"Knowledge-guided LLM prediction on dynamic text-attributed graphs"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  };

  auto* ingest = app.add_subcommand("ingest", "Validate the dataset and build the binary store");
  add_config(ingest);

  auto* metrics = app.add_subcommand("metrics", "Print the structural evidence of one (src, dst, t) query");
  add_config(metrics);
  NodeId q_src = 0, q_dst = 0;
  double q_t = 0;
  bool q_directed = false;
  metrics->add_option("--src", q_src, "Source node id")->required();
  metrics->add_option("--dst", q_dst, "Destination node id")->required();
  metrics->add_option("--t", q_t, "Query time; only edges strictly before it count")->required();
  metrics->add_flag("--directed", q_directed, "Directed neighbor sets");

  auto* prep = app.add_subcommand("prep", "Compute distribution and preference dictionaries (prep.json)");
  add_config(prep);

  auto* sum_global = app.add_subcommand("summarize-global", "Run the initial and global summary agents");
  add_config(sum_global);
  auto* sum_local = app.add_subcommand("summarize-local", "Run local summary agents on the most active nodes");
  add_config(sum_local);
  auto* reflect = app.add_subcommand("reflect", "Run the reflection agent on validation false positives");
  add_config(reflect);

  std::string task;
  auto* predict = app.add_subcommand("predict", "Run prediction for the configured tasks (resumes checkpoints)");
  add_config(predict);
  predict->add_option("--task", task, "Only this task: lp, nr or ec");

  auto* evaluate = app.add_subcommand("evaluate", "Score prediction files into reports");
  add_config(evaluate);
  evaluate->add_option("--task", task, "Only this task: lp, nr or ec");

  auto* consistency = app.add_subcommand("analyze-consistency", "Label consistency by node pair and by edge text");
  add_config(consistency);
  bool c_directed = false;
  double c_min_fraction = 0.10;
  std::string c_split = "all";
  consistency->add_flag("--directed", c_directed, "Group by ordered instead of unordered pairs");
  consistency->add_option("--min-fraction", c_min_fraction, "Minimum share of repeated-group interactions")
      ->capture_default_str();
  consistency->add_option("--split", c_split, "Edge range: all, train, valid or test")
      ->check(CLI::IsMember({"all", "train", "valid", "test"}))
      ->capture_default_str();

  auto* pareto = app.add_subcommand("analyze-pareto", "Interaction coverage of the most active nodes");
  add_config(pareto);
  double p_fraction = 0.10;
  pareto->add_option("--fraction", p_fraction, "Share of active nodes selected")->capture_default_str();

  auto* recall = app.add_subcommand("recall-debug", "Show threshold recall and ranking for one source");
  add_config(recall);
  NodeId r_src = 0;
  double r_t = 0;
  recall->add_option("--src", r_src, "Source node id")->required();
  recall->add_option("--t", r_t, "Query time")->required();

  auto* run = app.add_subcommand("run", "Full pipeline: ingest, prep, knowledge, predict, evaluate");
  add_config(run);
  bool force = false;
  run->add_flag("--force", force, "Regenerate knowledge even when the cache is valid");

  auto* dtgb = app.add_subcommand("import-dtgb", "Convert a DTGB dataset directory to the canonical layout");
  std::string dtgb_in, dtgb_out;
  DtgbLayout layout;
  dtgb->add_option("--input", dtgb_in, "DTGB dataset directory")->required()->check(CLI::ExistingDirectory);
  dtgb->add_option("--output", dtgb_out, "Output directory")->required();
  dtgb->add_option("--src-column", layout.src_column)->capture_default_str();
  dtgb->add_option("--dst-column", layout.dst_column)->capture_default_str();
  dtgb->add_option("--ts-column", layout.ts_column)->capture_default_str();
  dtgb->add_option("--label-column", layout.label_column)->capture_default_str();
  dtgb->add_option("--text-id-column", layout.text_id_column)->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic dataset in the canonical layout");
  SyntheticOptions so;
  std::string synth_out;
  synth->add_option("--output", synth_out, "Output directory")->required();
  synth->add_option("--nodes", so.nodes)->capture_default_str();
  synth->add_option("--edges", so.edges)->capture_default_str();
  synth->add_option("--labels", so.labels)->capture_default_str();
  synth->add_option("--seed", so.seed)->capture_default_str();
  synth->add_option("--repeat-prob", so.repeat_prob)->capture_default_str();
  synth->add_option("--zipf", so.zipf)->capture_default_str();
  synth->add_flag("--bipartite", so.bipartite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*synth) {
      const fs::path out(synth_out);
      export_dataset(generate_synthetic(so),
                     {out / "edges.csv", out / "node_texts.csv", out / "edge_texts.csv", out / "labels.csv"});
      std::cout << "wrote " << out.string() << "\n";
      return kExitOk;
    }
    if (*dtgb) {
      const auto files = import_dtgb(dtgb_in, dtgb_out, layout);
      std::cout << "wrote " << files.edges.parent_path().string() << "\n";
      return kExitOk;
    }

    const auto cfg = load_config(config_path);
    if (*run) {
      Pipeline p(with_overrides(cfg, force));
      p.run();
      std::cout << "run complete: " << p.path_of("manifest.json").string() << "\n";
      return kExitOk;
    }

    Pipeline p(cfg, /*carry_stages=*/true);
    if (*ingest) {
      const auto& s = p.store();
      std::cout << "nodes " << s.num_nodes() << "\nedges " << s.num_edges() << "\nlabels " << s.num_labels() << "\n";
    } else if (*metrics) {
      EvidenceOptions o;
      o.direction = q_directed ? Direction::directed : Direction::undirected;
      std::cout << to_json(pair_evidence(p.store(), {q_src, q_dst, q_t, std::nullopt}, o), &p.store()).dump(2)
                << "\n";
      return kExitOk;
    } else if (*prep) {
      p.prep();
      std::cout << p.path_of("prep.json").string() << "\n";
    } else if (*sum_global) {
      p.summarize_global();
      std::cout << cfg.knowledge_cache.string() << "\n";
    } else if (*sum_local) {
      std::cout << p.summarize_local().local_profiles.size() << " local profiles\n";
    } else if (*reflect) {
      const auto& k = p.reflect();
      const auto* r = k.reflection_for("LP");
      std::cout << (r && r->significant ? "Significant: " + r->supplementation : std::string("Not Significant"))
                << "\n";
    } else if (*predict) {
      if (cfg.mode == PromptMode::gad) p.load_knowledge(cfg.knowledge_cache);
      for (Task t : tasks_or(cfg, task))
        std::cout << task_name(t) << ": " << p.predictions(t).size() << " records\n";
    } else if (*evaluate) {
      for (Task t : tasks_or(cfg, task)) {
        p.load_predictions(t);
        std::cout << p.report(t).render_text();
      }
    } else if (*consistency) {
      const auto sp = p.split();
      ConsistencyOptions o;
      o.directed = c_directed;
      o.min_fraction_repeated = c_min_fraction;
      if (c_split == "train") o.end = sp.train_end;
      if (c_split == "valid") o.begin = sp.train_end, o.end = sp.valid_end;
      if (c_split == "test") o.begin = sp.valid_end;
      const auto rep = label_consistency(p.store(), o);
      std::cout << rep.render_text();
      std::cout << rep.to_json().dump(2) << "\n";
      return kExitOk;
    } else if (*pareto) {
      const auto rep = pareto_coverage(p.split(), p_fraction);
      std::cout << rep.render_text();
      return kExitOk;
    } else if (*recall) {
      PromptContext ctx;
      ctx.store = &p.store();
      ctx.mode = cfg.mode;
      if (cfg.mode == PromptMode::gad) ctx.knowledge = &p.load_knowledge(cfg.knowledge_cache);
      EvidenceOptions o;
      o.direction = cfg.direction;
      std::vector<PairEvidence> pool;
      for (NodeId v : negative_pool(p.store())) pool.push_back(pair_evidence(p.store(), {r_src, v, r_t, std::nullopt}, o));
      const auto [unranked, ranked] = recall_and_rank(r_src, r_t, pool, ctx);
      const auto keys = rank_keys(ctx.knowledge && ctx.knowledge->global_link ? &*ctx.knowledge->global_link : nullptr);
      std::cout << recall_debug_json(ranked, unranked, keys).dump(2) << "\n";
      return kExitOk;
    }
    p.write_manifest();
    return kExitOk;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
}
