#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run aop_lab(const std::string& args) {
  const std::string cmd = quote(AOP_LAB) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fx(const std::string& name) { return quote(testing::fixture(name).string()); }

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(aop_lab("").code == 1);
  CHECK(aop_lab("frobnicate").code == 1);
  CHECK(aop_lab("extract --lexicon x").code == 1);
  CHECK(aop_lab("-j -3 validate -c x").code == 1);
  CHECK(aop_lab("--help").code == 0);
  CHECK(aop_lab("--version").code == 0);
}

TEST_CASE("validate") {
  const auto ok = aop_lab("validate -c " + fx("pipeline/config.ini"));
  CHECK(ok.code == 0);
  CHECK(ok.output == "ok: stages extract metrics predictors count analyze\n");

  testing::TempDir dir;
  testing::write(dir / "bad.ini", "[paths]\noutput = o\n[sampling]\nrandom_contexts = 2\n[run]\nstages = metrics\n");
  const auto bad = aop_lab("validate -c " + quote((dir / "bad.ini").string()));
  CHECK(bad.code == 1);
  CHECK(bad.output.find("sampling.seed is required") != std::string::npos);
}

TEST_CASE("data and scorer errors") {
  testing::TempDir dir;
  const auto out = quote((dir / "cap.jsonl").string());
  CHECK(aop_lab("extract --treebank " + quote((dir / "missing").string()) + " --lexicon " + fx("lexicon.txt") +
                " -o " + out)
            .code == 2);
  REQUIRE(aop_lab("extract --treebank " + fx("treebank") + " --lexicon " + fx("lexicon.txt") + " -o " + out).code ==
          0);
  CHECK(fs::file_size(dir / "cap.jsonl") > 0);

  const auto garbage = aop_lab("metrics --cap " + out + " --scorer 'remote:exec:echo nope' -o " +
                               quote((dir / "m.jsonl").string()));
  CHECK(garbage.code == 3);
  CHECK(garbage.output.find("scorer error") != std::string::npos);

  const auto oracle = aop_lab("metrics --cap " + out + " --scorer oracle:corpus=" +
                              testing::fixture("pipeline/oracle.txt").string() + " -o " +
                              quote((dir / "m.jsonl").string()) + " --random-contexts 2");
  CHECK(oracle.code == 1);
  CHECK(oracle.output.find("seed") != std::string::npos);
}

TEST_CASE("run with overrides") {
  testing::TempDir dir;
  const auto out = quote((dir / "out").string());
  const auto first = aop_lab("-j 2 run -c " + fx("pipeline/config.ini") + " --output " + out + " --stages extract,count");
  CHECK(first.code == 0);
  CHECK(fs::exists(dir / "out" / "counts.tsv"));
  CHECK_FALSE(fs::exists(dir / "out" / "metrics.jsonl"));
  const auto second = aop_lab("run -c " + fx("pipeline/config.ini") + " --output " + out + " --stages extract,count");
  CHECK(second.code == 0);
  CHECK(second.output.find("skip") != std::string::npos);
  CHECK(aop_lab("run -c " + fx("pipeline/config.ini") + " --output " + out + " --stages extract,dance").code == 1);
}
