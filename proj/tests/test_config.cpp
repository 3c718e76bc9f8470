#include <gtest/gtest.h>

#include "dytag/config.hpp"
#include "dytag/error.hpp"
#include "support.hpp"

using namespace dytag;
using namespace dytag::testing;

namespace {

nlohmann::json minimal() {
  return {{"edges", "e.csv"}, {"node_texts", "n.csv"}, {"edge_texts", "t.csv"}, {"labels", "l.csv"}};
}

bool mentions(const std::vector<std::string>& errors, std::string_view needle) {
  for (const auto& e : errors)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Config, MinimalConfigFillsDefaults) {
  const auto r = parse_config(minimal(), "/data/enron", std::nullopt);
  ASSERT_TRUE(r.config) << (r.errors.empty() ? "" : r.errors.front());
  const auto& c = *r.config;
  EXPECT_EQ(c.sample_count, 10240u);
  EXPECT_EQ(c.batch_size, 256u);
  EXPECT_EQ(c.temperature, 0.0);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.backend, BackendKind::mock);
  EXPECT_EQ(c.mode, PromptMode::gad);
  EXPECT_EQ(c.tasks.size(), 3u);
  EXPECT_EQ(c.dataset_name, "enron");
  EXPECT_EQ(*c.edges, std::filesystem::path("/data/enron/e.csv"));
  EXPECT_EQ(c.knowledge_cache, std::filesystem::path("/data/enron/run/knowledge.json"));
  EXPECT_EQ(c.canonical["batch_size"], 256);
  EXPECT_EQ(c.canonical["seed"], 0);
}

TEST(Config, NegativeSeedIsOneNamedError) {
  auto j = minimal();
  j["seed"] = -3;
  const auto r = parse_config(j, ".", std::nullopt);
  EXPECT_FALSE(r.config);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].find("seed"), std::string::npos);
}

TEST(Config, UnknownKeySuggestsClosest) {
  auto j = minimal();
  j["batchsize"] = 64;
  const auto r = parse_config(j, ".", std::nullopt);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].find("'batchsize'"), std::string::npos);
  EXPECT_NE(r.errors[0].find("batch_size"), std::string::npos);
  EXPECT_EQ(suggest_key("temprature"), "temperature");
  EXPECT_FALSE(suggest_key("completely_unrelated_key"));
}

TEST(Config, ReportsEveryProblemAtOnce) {
  nlohmann::json j = {{"edges", "e.csv"}, {"seed", "x"}, {"mode", "fancy"}, {"tasks", {"lp", "zz"}},
                      {"train_frac", 0.9}, {"valid_frac", 0.2}, {"backend", "http"}, {"batch_size", 0}};
  const auto r = parse_config(j, ".", std::nullopt);
  EXPECT_FALSE(r.config);
  for (const char* key : {"seed", "mode", "tasks", "valid_frac", "endpoint", "LLM_API_KEY", "batch_size", "node_texts"})
    EXPECT_TRUE(mentions(r.errors, key)) << key;
}

TEST(Config, HttpNeedsKeyButNeverSerializesIt) {
  auto j = minimal();
  j["backend"] = "http";
  j["endpoint"] = "https://llm.example";
  EXPECT_TRUE(mentions(parse_config(j, ".", std::nullopt).errors, "LLM_API_KEY"));
  const auto ok = parse_config(j, ".", std::string("secret-key"));
  ASSERT_TRUE(ok.config);
  EXPECT_EQ(ok.config->api_key, "secret-key");
  EXPECT_EQ(ok.config->canonical.dump().find("secret-key"), std::string::npos);
}

TEST(Config, ReplayNeedsDistinctTranscript) {
  auto j = minimal();
  j["backend"] = "replay";
  EXPECT_TRUE(mentions(parse_config(j, ".", std::nullopt).errors, "replay_transcript"));
  j["replay_transcript"] = "t.jsonl";
  j["transcript"] = "t.jsonl";
  EXPECT_TRUE(mentions(parse_config(j, ".", std::nullopt).errors, "transcript"));
  j["transcript"] = "out.jsonl";
  EXPECT_TRUE(parse_config(j, ".", std::nullopt).config);
}

TEST(Config, DigestIgnoresExecutionOnlyKeys) {
  auto a = minimal();
  auto b = minimal();
  b["workers"] = 2;
  b["max_in_flight"] = 3;
  b["force_regenerate"] = true;
  const auto ca = parse_config(a, ".", std::nullopt).config;
  const auto cb = parse_config(b, ".", std::nullopt).config;
  EXPECT_EQ(ca->digest(), cb->digest());
  b["seed"] = 1;
  EXPECT_NE(ca->digest(), parse_config(b, ".", std::nullopt).config->digest());
  EXPECT_EQ(ca->digest().size(), 64u);
}

TEST(Config, StoreCacheReplacesDatasetFiles) {
  const auto r = parse_config({{"store", "s.bin"}, {"dataset_name", "x"}}, ".", std::nullopt);
  EXPECT_TRUE(r.config);
  EXPECT_TRUE(mentions(parse_config(nlohmann::json::object(), ".", std::nullopt).errors, "edges"));
}

TEST(Config, LoadReadsFileAndRejectsBadJson) {
  TempDir dir;
  spit(dir / "ok.json", minimal().dump());
  EXPECT_EQ(load_config(dir / "ok.json").dataset_name, dir.path().filename().string());
  spit(dir / "bad.json", "{ not json");
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
  auto j = minimal();
  j["seed"] = -1;
  j["batchsize"] = 1;
  spit(dir / "two.json", j.dump());
  try {
    load_config(dir / "two.json");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("seed"), std::string::npos);
    EXPECT_NE(msg.find("batchsize"), std::string::npos);
  }
}
