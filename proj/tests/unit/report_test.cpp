#include <gtest/gtest.h>

#include "uncertain/replay.hpp"
#include "uncertain/report.hpp"
#include "uncertain/scenario.hpp"

namespace {

using namespace uncertain;

PerturbationStats file_stats(std::uint64_t total, std::uint64_t perturbed) {
  PerturbationStats s;
  s.all = {total, perturbed};
  s.by_category[0] = {total, perturbed};
  return s;
}

TEST(Report, EmptyIsAllZeros) {
  const auto r = render_report({}, Grouping::kByArchetype);
  ASSERT_EQ(r.json["rows"].size(), 1u);
  EXPECT_EQ(r.json["rows"][0]["group"], "total");
  for (const auto& [mode, cell] : r.json["rows"][0]["cells"].items()) {
    for (const auto& [metric, v] : cell.items()) {
      EXPECT_EQ(v["total"], 0) << mode << metric;
      EXPECT_EQ(v["percent"], 0.0);
    }
  }
  EXPECT_NE(r.text.find("0.00%"), std::string::npos);
  EXPECT_EQ(render_report({}, Grouping::kByCategory).json["rows"].size(), 4u);
}

TEST(Report, TenPercentCell) {
  const auto r = render_report({{"virus", kModeStatic10, file_stats(100, 10)}}, Grouping::kByArchetype);
  EXPECT_NE(r.text.find("10.00%"), std::string::npos) << r.text;
  EXPECT_EQ(r.json["rows"][0]["cells"][kModeStatic10]["all"]["percent"], 10.0);
  EXPECT_EQ(r.json["rows"][0]["cells"][kModeStatic10]["all"]["perturbed"], 10);
}

TEST(Report, ThreeModesGiveThreeColumnsPerMetric) {
  ScenarioSpec spec;
  spec.archetype = Archetype::kFlooder;
  spec.event_count = 3000;
  const auto trace = generate_scenario(spec, 1);
  std::vector<ReportEntry> entries;
  for (const std::optional<double> t : {std::optional<double>(0.10), std::optional<double>(0.50), std::optional<double>()}) {
    PolicyConfig c;
    c.static_threshold = t;
    entries.push_back({"flooder", mode_label(c), replay_trace(trace, c, 1).stats});
  }
  const auto r = render_report(entries, Grouping::kByArchetype);
  EXPECT_EQ(r.json["modes"], (nlohmann::ordered_json{"static_10", "static_50", "dynamic"}));
  for (const auto& row : r.json["rows"]) EXPECT_EQ(row["cells"].size(), 3u);
  // Header line: one "10%", "50%", "Dynamic" triple per metric block.
  const auto second = r.text.substr(r.text.find('\n') + 1);
  std::size_t n = 0;
  for (auto p = second.find("Dynamic"); p != std::string::npos; p = second.find("Dynamic", p + 1)) ++n;
  EXPECT_EQ(n, 3u);
  // A flooder at 50% perturbs about half its connection calls.
  const double pct = r.json["rows"][0]["cells"]["static_50"]["connection"]["percent"];
  EXPECT_NEAR(pct, 50.0, 5.0);
}

TEST(Report, ByCategorySplitsRows) {
  PerturbationStats s;
  s.by_category = {RateCounter{10, 1}, RateCounter{20, 4}, RateCounter{5, 5}};
  s.buffer_by_category = {RateCounter{4, 1}, RateCounter{2, 0}, RateCounter{0, 0}};
  s.all = {35, 10};
  s.connection = {20, 4};
  s.buffer = {6, 1};
  const auto r = render_report({{"x", kModeDynamic, s}}, Grouping::kByCategory);
  const auto& rows = r.json["rows"];
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0]["group"], "file");
  EXPECT_EQ(rows[1]["cells"]["dynamic"]["connection"]["perturbed"], 4);
  EXPECT_EQ(rows[0]["cells"]["dynamic"]["connection"]["total"], 0);
  EXPECT_EQ(rows[0]["cells"]["dynamic"]["buffer"]["total"], 4);
  EXPECT_EQ(rows[3]["cells"]["dynamic"]["all"]["perturbed"], 10);
}

TEST(Report, ModeLabels) {
  PolicyConfig c;
  EXPECT_EQ(mode_label(c), "dynamic");
  c.static_threshold = 0.1;
  EXPECT_EQ(mode_label(c), "static_10");
  c.static_threshold = 0.25;
  EXPECT_EQ(mode_label(c), "static_25");
}

TEST(Report, ExtraModesFollowCanonicalOnes) {
  const auto r = render_report({{"a", "static_25", file_stats(4, 1)}}, Grouping::kByArchetype);
  EXPECT_EQ(r.json["modes"].size(), 4u);
  EXPECT_EQ(r.json["modes"][3], "static_25");
}

}  // namespace
