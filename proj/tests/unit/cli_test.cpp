#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "uncertain/live/tracer.hpp"

namespace {

namespace fs = std::filesystem;

struct Shell {
  int code = -1;
  std::string out;  // stdout and stderr together
};

Shell sh(const std::string& args) {
  const std::string cmd = std::string(UNCERTAIN_CLI) + " " + args + " 2>&1";
  Shell r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int st = ::pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    char tmpl[] = "/tmp/uncertain-cli-XXXXXX";
    ASSERT_NE(::mkdtemp(tmpl), nullptr);
    dir_ = tmpl;
  }
  void TearDown() override {
    if (!dir_.empty()) fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return dir_ + "/" + name; }
  std::string dir_;
};

TEST_F(Cli, UnknownConfigKeyIsAConfigError) {
  std::ofstream(path("bad.json")) << R"({"thresold": 0.1})";
  const auto r = sh("replay " + std::string(UNCERTAIN_TEST_DATA) + "/three_events.jsonl --out " +
                    path("o") + " --config " + path("bad.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("thresold"), std::string::npos) << r.out;
}

TEST_F(Cli, ReplayIsByteIdentical) {
  ASSERT_EQ(sh("gen --archetype trojan --events 3000 --seed 2 --out " + path("t.jsonl")).code, 0);
  ASSERT_EQ(sh("replay " + path("t.jsonl") + " --seed 9 --out " + path("a")).code, 0);
  ASSERT_EQ(sh("replay " + path("t.jsonl") + " --seed 9 --out " + path("b")).code, 0);
  EXPECT_FALSE(slurp(path("a/decisions.jsonl")).empty());
  EXPECT_EQ(slurp(path("a/decisions.jsonl")), slurp(path("b/decisions.jsonl")));
  EXPECT_EQ(slurp(path("a/stats.json")), slurp(path("b/stats.json")));
}

TEST_F(Cli, GenIsDeterministic) {
  ASSERT_EQ(sh("gen --archetype apt --seed 7 --out " + path("a.jsonl")).code, 0);
  ASSERT_EQ(sh("gen --archetype apt --seed 7 --out " + path("b.jsonl")).code, 0);
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  EXPECT_EQ(sh("gen --archetype ghost").code, 1);
}

TEST_F(Cli, BadTraceIsAnInputError) {
  const auto r = sh("replay " + std::string(UNCERTAIN_TEST_DATA) + "/seq_gap.jsonl --out " + path("o"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("seq 3"), std::string::npos) << r.out;
}

TEST_F(Cli, CampaignResumeRunsNothingAndReportParses) {
  ASSERT_EQ(sh("gen --archetype worm --events 1500 --seed 1 --out " + path("w.jsonl")).code, 0);
  std::ofstream(path("corpus.json"))
      << R"({"entries": [{"id": "w", "trace": "w.jsonl", "repetitions": 3, "group": "worm"}]})";
  const auto first = sh("campaign --corpus " + path("corpus.json") + " --out " + path("c") + " --jobs 1");
  ASSERT_EQ(first.code, 0) << first.out;
  EXPECT_NE(first.out.find("18 runs executed"), std::string::npos) << first.out;
  const auto summary = slurp(path("c/summary.json"));
  const auto again =
      sh("campaign --corpus " + path("corpus.json") + " --out " + path("c") + " --jobs 1 --resume");
  ASSERT_EQ(again.code, 0) << again.out;
  EXPECT_NE(again.out.find("0 runs executed"), std::string::npos) << again.out;
  EXPECT_EQ(slurp(path("c/summary.json")), summary);

  const auto rep = sh("report --format json " + path("c/summary.json"));
  ASSERT_EQ(rep.code, 0) << rep.out;
  const auto j = nlohmann::json::parse(rep.out);
  EXPECT_EQ(j["modes"].size(), 3u);
}

TEST_F(Cli, CampaignWithAMissingTraceIsPartial) {
  std::ofstream(path("corpus.json")) << R"([{"id": "gone", "trace": "nowhere.jsonl"}])";
  EXPECT_EQ(sh("campaign --corpus " + path("corpus.json") + " --out " + path("c")).code, 6);
  EXPECT_TRUE(fs::exists(path("c/summary.json")));
}

TEST_F(Cli, ImportReportsCounts) {
  const auto r = sh("import " + std::string(UNCERTAIN_TEST_DATA) + "/sample.strace --out " + path("s.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("11 recognized"), std::string::npos) << r.out;
  EXPECT_EQ(sh("replay " + path("s.jsonl") + " --out " + path("o")).code, 0);
}

TEST_F(Cli, MissingProgramCannotStart) {
  if (!uncertain::live::platform_supported()) GTEST_SKIP();
  EXPECT_EQ(sh("run --out " + path("r") + " -- " + path("nope")).code, 5);
}

TEST_F(Cli, ZeroThresholdRunSucceeds) {
  if (!uncertain::live::platform_supported()) GTEST_SKIP();
  const auto r = sh("run --threshold 0 --out " + path("r") + " -- " + std::string(UNCERTAIN_FIXTURE_DIR) +
                    "/fx_echo hi");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("hi\n"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(path("r/outcome.json")));
  EXPECT_EQ(j["outcome"], "succeeded");
  EXPECT_EQ(j["stats"]["all"]["perturbed"], 0);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(sh("").code, 1);
  EXPECT_EQ(sh("frobnicate").code, 1);
  EXPECT_EQ(sh("--version").code, 0);
}

}  // namespace
