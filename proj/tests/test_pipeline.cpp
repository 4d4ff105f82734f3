#include <doctest.h>

#include <json.hpp>

#include "aoplab/pipeline.hpp"
#include "support.hpp"

using namespace aoplab;
using namespace aoplab::pipeline;
namespace fs = std::filesystem;

namespace {

RunConfig fixture_config(const fs::path& out, int workers = 1) {
  auto v = validate_config(testing::fixture("pipeline/config.ini"));
  REQUIRE(v.errors.empty());
  auto c = *v.config;
  c.output = out;
  c.workers = workers;
  return c;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = testing::slurp(e.path());
  }
  return out;
}

std::vector<std::string> errors_for(const testing::TempDir& dir, const std::string& ini) {
  testing::write(dir / "c.ini", ini);
  return validate_config(dir / "c.ini").errors;
}

bool has_error(const std::vector<std::string>& errors, const std::string& needle) {
  for (const auto& e : errors)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("fixture config resolves relative paths") {
  const auto v = validate_config(testing::fixture("pipeline/config.ini"));
  REQUIRE(v.config.has_value());
  const auto& c = *v.config;
  CHECK(c.treebank.is_absolute());
  CHECK(fs::exists(c.lexicon));
  CHECK(c.scorer.find(testing::fixture("pipeline/oracle.txt").lexically_normal().string()) != std::string::npos);
  CHECK(c.stages == std::vector<Stage>{Stage::extract, Stage::metrics, Stage::predictors, Stage::count, Stage::analyze});
  CHECK(c.seed == std::optional<std::uint64_t>(7));
  CHECK(c.batch_tokens == 400);
}

TEST_CASE("config validation reports every problem") {
  testing::TempDir dir;
  const auto errors = errors_for(dir,
                                 "[paths]\nlexicon = missing.txt\noutput = out\nbogus = 1\n"
                                 "[scorer]\nspec = magic:thing\ntimeout_ms = -5\n"
                                 "[sampling]\nrandom_contexts = 4\n"
                                 "[count]\nlowercase = maybe\n"
                                 "[extra]\nx = 1\n"
                                 "[run]\nstages = extract, metrics, dance\n");
  CHECK(has_error(errors, "unknown key 'paths.bogus'"));
  CHECK(has_error(errors, "unknown section [extra]"));
  CHECK(has_error(errors, "paths.treebank is required"));
  CHECK(has_error(errors, "paths.lexicon: path does not exist"));
  CHECK(has_error(errors, "scorer.spec: expected oracle:... or remote:..."));
  CHECK(has_error(errors, "scorer.timeout_ms"));
  CHECK(has_error(errors, "sampling.seed is required"));
  CHECK(has_error(errors, "count.lowercase"));
  CHECK(has_error(errors, "unknown stage 'dance'"));

  CHECK(has_error(errors_for(dir, "[paths]\noutput = o\n[run]\nstages = predictors\n"), "paths.ratings is required"));
  CHECK(has_error(errors_for(dir, "[paths]\noutput = o\n[run]\nstages = count\n"), "paths.shards is required"));
  CHECK(has_error(errors_for(dir, "[paths]\noutput = o\narticle_exceptions = none.tsv\n[scorer]\nspec = remote:x\n"
                                  "[run]\nstages = metrics\n"),
                  "paths.article_exceptions: path does not exist"));
  CHECK(has_error(errors_for(dir, "[paths]\noutput = o\n[scorer]\nspec = oracle:order=2\n[run]\nstages = metrics\n"),
                  "needs corpus=PATH"));
  CHECK(has_error(errors_for(dir, "[broken\n"), ""));
  CHECK_FALSE(errors_for(dir, "[broken\n").empty());
}

TEST_CASE("end-to-end run writes every artifact") {
  testing::TempDir dir;
  const auto result = run_pipeline(fixture_config(dir / "out"));
  CHECK(result.ran == std::vector<std::string>{"extract", "metrics", "predictors", "count", "analyze"});
  CHECK(result.skipped.empty());
  for (const char* f : {"cap.jsonl", "metrics.jsonl", "predictors.jsonl", "counts.tsv", "splits.json", "timeline.json",
                        "report/summary.json", "report/exposure_curves.csv", "report/aop_vs_counts.csv"})
    CHECK_MESSAGE(fs::exists(dir / "out" / f), f);
  CHECK_FALSE(fs::exists(dir / "out" / ".staging"));
  CHECK_FALSE(fs::exists(dir / "out" / "checkpoints"));

  const auto manifest = nlohmann::json::parse(testing::slurp(result.manifest));
  CHECK(manifest["tool_version"] == kToolVersion);
  CHECK(manifest["artifacts"].size() == 7);
  CHECK(manifest["inputs"].contains("oracle_corpus"));
  CHECK(manifest["stages"]["count"]["outputs"].size() == 3);
}

TEST_CASE("runs are deterministic and worker invariant") {
  testing::TempDir dir;
  run_pipeline(fixture_config(dir / "a", 1));
  run_pipeline(fixture_config(dir / "b", 1));
  run_pipeline(fixture_config(dir / "c", 4));
  const auto a = tree_bytes(dir / "a");
  CHECK(a == tree_bytes(dir / "b"));
  CHECK(a == tree_bytes(dir / "c"));
  CHECK(a.at("manifest.json") == tree_bytes(dir / "c").at("manifest.json"));
}

TEST_CASE("unchanged stages are skipped and edits propagate") {
  testing::TempDir dir;
  auto c = fixture_config(dir / "out");
  run_pipeline(c);
  const auto manifest = testing::slurp(dir / "out" / kManifestFile);
  auto again = run_pipeline(c);
  CHECK(again.ran.empty());
  CHECK(again.skipped.size() == 5);
  CHECK(testing::slurp(dir / "out" / kManifestFile) == manifest);

  SUBCASE("a damaged artifact is rebuilt") {
    testing::write(dir / "out" / "metrics.jsonl", "tampered\n");
    const auto r = run_pipeline(c);
    CHECK(r.ran == std::vector<std::string>{"metrics"});
    CHECK(testing::slurp(dir / "out" / kManifestFile) == manifest);
  }
  SUBCASE("a config change reruns everything downstream") {
    c.pmi_alpha = 1.0;
    const auto r = run_pipeline(c);
    CHECK(r.ran == std::vector<std::string>{"extract", "metrics", "predictors", "count", "analyze"});
  }
  SUBCASE("a custom article table reruns metrics") {
    testing::write(dir / "articles.tsv", "old\ta\n");
    c.article_exceptions = dir / "articles.tsv";
    const auto r = run_pipeline(c);
    CHECK(r.ran == std::vector<std::string>{"extract", "metrics", "predictors", "count", "analyze"});
    const auto m = nlohmann::json::parse(testing::slurp(dir / "out" / kManifestFile));
    CHECK(m["inputs"].contains("article_exceptions"));
  }
  SUBCASE("the worker count is not part of any key") {
    c.workers = 3;
    CHECK(run_pipeline(c).ran.empty());
  }
}

TEST_CASE("a failing stage is quarantined and named") {
  testing::TempDir dir;
  auto c = fixture_config(dir / "out");
  c.stages = {Stage::extract, Stage::metrics};
  c.scorer = "remote:exec:echo garbage";
  try {
    run_pipeline(c);
    FAIL("expected ScorerError");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).rfind("stage 'metrics' failed: ", 0) == 0);
  }
  CHECK(fs::exists(dir / "out" / "quarantine" / "metrics"));
  CHECK(fs::exists(dir / "out" / "cap.jsonl"));
  CHECK_FALSE(fs::exists(dir / "out" / "metrics.jsonl"));
  const auto manifest = nlohmann::json::parse(testing::slurp(dir / "out" / kManifestFile));
  CHECK(manifest["stages"].contains("extract"));
  CHECK_FALSE(manifest["stages"].contains("metrics"));

  SUBCASE("missing upstream artifacts") {
    auto d = fixture_config(dir / "fresh");
    d.stages = {Stage::analyze};
    CHECK_THROWS_AS(run_pipeline(d), DataError);
  }
  SUBCASE("invalid configs never start") {
    auto d = fixture_config(dir / "other");
    d.lexicon = dir / "nope.txt";
    CHECK_THROWS_AS(run_pipeline(d), UsageError);
    CHECK_FALSE(fs::exists(dir / "other"));
  }
}
